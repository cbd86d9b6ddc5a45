"""Decay coefficients and reaction-rate terms.

The default kinetics are hybrid: chlorine decays at a first-order rate
(bulk plus pipe-wall contribution) and both chlorine and the reactive
surrogate are consumed by a second-order mutual term. The single-state bulk
variants (first-order, limited, nth-order, ...) are exposed as pure rate
functions for single-species studies.

Rate constants in user files are per day (field convention); everything in
this module works in per-second units.
"""

from __future__ import annotations

from dataclasses import dataclass

SECONDS_PER_DAY = 86400.0

BULK_MODEL_VARIANTS = (
    "first-order",
    "first-order-with-stable",
    "nth-order",
    "nth-order-with-stable",
    "second-order-fictitious",
)


@dataclass(frozen=True)
class ReactionParams:
    """All rates in SI seconds: k_b 1/s, k_w and k_f m/s, k_r L/(mg s)."""

    k_b: float = 0.0
    k_w: float = 0.0
    k_f: float = 0.0
    k_r: float = 0.0
    c_limit: float | None = None  # mg/L
    order: float | None = None

    def __post_init__(self):
        for name in ("k_b", "k_w", "k_f", "k_r"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.c_limit is not None and self.c_limit < 0:
            raise ValueError("c_limit must be nonnegative")
        if self.order is not None and self.order < 1:
            raise ValueError("reaction order must be >= 1")

    @classmethod
    def from_per_day(
        cls, kb_per_day: float, kw_m_per_day: float, kf_m_per_day: float,
        kr_l_per_mg_day: float, **kw,
    ) -> "ReactionParams":
        return cls(
            k_b=kb_per_day / SECONDS_PER_DAY,
            k_w=kw_m_per_day / SECONDS_PER_DAY,
            k_f=kf_m_per_day / SECONDS_PER_DAY,
            k_r=kr_l_per_mg_day / SECONDS_PER_DAY,
            **kw,
        )


def pipe_decay_coefficient(k_b: float, k_w: float, k_f: float, r_p: float) -> float:
    """First-order decay rate in a pipe: bulk plus wall mass-transfer term.

    k_b + 2 k_w k_f / (r_p (k_w + k_f)); the wall term is 0 by continuous
    extension when k_w + k_f = 0.
    """
    if r_p <= 0:
        raise ValueError("pipe radius must be positive")
    if min(k_b, k_w, k_f) < 0:
        raise ValueError("rate constants must be nonnegative")
    denom = r_p * (k_w + k_f)
    if denom == 0:  # includes subnormal sums that underflow when scaled
        return k_b
    return k_b + 2.0 * k_w * k_f / denom


def tank_decay_coefficient(k_b: float) -> float:
    """Tanks see bulk decay only; wall decay happens in pipes."""
    if k_b < 0:
        raise ValueError("k_b must be nonnegative")
    return k_b


def decay_rate_term(c: float, k: float) -> float:
    """First-order sink -k c, mg/L/s."""
    return -k * c


def mutual_rate_term(c: float, c_other: float, k_r: float) -> float:
    """Second-order mutual sink -k_r c c_other; both species lose this same amount."""
    return -k_r * c * c_other


@dataclass(frozen=True)
class BulkModelSpec:
    variant: str
    params: ReactionParams

    def __post_init__(self):
        if self.variant not in BULK_MODEL_VARIANTS:
            raise ValueError(f"unknown bulk model variant {self.variant!r}")
        p = self.params
        if self.variant in ("first-order-with-stable", "nth-order-with-stable"):
            if p.c_limit is None:
                raise ValueError(f"{self.variant} needs c_limit")
        if self.variant in ("nth-order", "nth-order-with-stable"):
            if p.order is None:
                raise ValueError(f"{self.variant} needs a reaction order")


def bulk_model_rate(
    spec: BulkModelSpec, c: float, c_other: float = 0.0
) -> tuple[float, float]:
    """Per-species rates (mg/L/s) for the single-state bulk model variants.

    The second component is nonzero only for the mutual second-order variant.
    """
    p = spec.params
    if spec.variant == "first-order":
        return (-p.k_b * c, 0.0)
    if spec.variant == "first-order-with-stable":
        return (-p.k_b * (c - p.c_limit), 0.0)
    if spec.variant == "nth-order":
        n = p.order
        if c < 0 and n != int(n):
            raise ValueError("nth-order rate undefined for c < 0 with non-integer n")
        return (-p.k_b * c**n, 0.0)
    if spec.variant == "nth-order-with-stable":
        n = p.order
        if c < 0 and (n - 1) != int(n - 1):
            raise ValueError("nth-order rate undefined for c < 0 with non-integer n")
        return (-p.k_b * (c - p.c_limit) * c ** (n - 1), 0.0)
    # second-order-fictitious
    rate = mutual_rate_term(c, c_other, p.k_r)
    return (rate, rate)
