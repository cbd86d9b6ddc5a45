"""Hydraulic schedule ingestion and the fixed space-time grid.

The hydraulics file is CSV with header ``time_s,element_id,quantity,value``.
Rows sharing a ``time_s`` form one hydraulic step starting at that time.
Quantities:

    flow_m3s        signed link flow (positive = from-node to to-node), or a
                    booster station's injection flow rate
    demand_m3s      junction demand or tank draw-off (>= 0)
    tank_volume_m3  tank volume at step start (initial value / cross-check)
    duration_s      explicit step duration (element_id is ignored, use "step")

Values not restated in a later step carry forward from the previous one.
Durations default to the gap to the next step's start; the final step needs
an explicit duration.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import HydraulicsError
from .network import NetworkTopology

log = logging.getLogger("aquanet")


@dataclass
class HydraulicStep:
    start: float  # s
    duration: float  # s
    flows: dict[str, float]  # link or booster id -> m3/s (signed for links)
    demands: dict[str, float]  # junction id -> m3/s
    tank_demands: dict[str, float]  # tank id -> m3/s
    tank_volumes: dict[str, float]  # tank id -> m3 at step start (recomputed)

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass
class HydraulicSchedule:
    steps: list[HydraulicStep]
    warnings: list[str] = field(default_factory=list)

    @property
    def horizon(self) -> float:
        return self.steps[-1].end

    def step_at(self, t: float) -> HydraulicStep:
        for step in self.steps:
            if step.start <= t < step.end:
                return step
        if math.isclose(t, self.horizon):
            return self.steps[-1]
        raise HydraulicsError(f"time {t} s outside schedule [0, {self.horizon}] s")


@dataclass
class DiscretizationGrid:
    pipe_ids: list[str]
    segments: np.ndarray  # s_i, int, per pipe
    seg_length: np.ndarray  # dx_i = L_i / s_i, m
    dt: float  # quality time-step, s
    warnings: list[str] = field(default_factory=list)

    @property
    def total_segments(self) -> int:
        return int(self.segments.sum())


@dataclass
class CourantField:
    pipe_ids: list[str]
    step_starts: list[float]
    courant: np.ndarray  # [pipe, step], |v| dt / dx
    direction: np.ndarray  # [pipe, step], +1 flow from->to, -1 reversed


@dataclass
class CflReport:
    violations: list[tuple[str, float, float]]  # (pipe id, step start, courant)
    stagnant: list[tuple[str, float]]  # (pipe id, step start) with courant == 0

    @property
    def ok(self) -> bool:
        return not self.violations


_QUANTITIES = ("flow_m3s", "demand_m3s", "tank_volume_m3", "duration_s")


def mean_velocity(q: float, r_p: float) -> float:
    """Mean flow velocity q / (pi r^2), signed like q."""
    if r_p <= 0:
        raise ValueError("pipe radius must be positive")
    return q / (math.pi * r_p**2)


def _parse_rows(text: str):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise HydraulicsError("empty hydraulics file")
    header = [h.strip() for h in lines[0].split(",")]
    if header != ["time_s", "element_id", "quantity", "value"]:
        raise HydraulicsError(
            "hydraulics header must be 'time_s,element_id,quantity,value'"
        )
    for lineno, line in enumerate(lines[1:], start=2):
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 4:
            raise HydraulicsError(f"line {lineno}: expected 4 comma-separated fields")
        try:
            t = float(parts[0])
            value = float(parts[3])
        except ValueError:
            raise HydraulicsError(f"line {lineno}: non-numeric time or value") from None
        if parts[2] not in _QUANTITIES:
            raise HydraulicsError(f"line {lineno}: unknown quantity {parts[2]!r}")
        yield t, parts[1], parts[2], value


def load_hydraulics(text: str, net: NetworkTopology) -> HydraulicSchedule:
    """Build a piecewise-constant schedule, recomputing tank volumes from flows."""
    link_ids = {link.id for link in net.links}
    booster_ids = {b.id for b in net.boosters}
    junction_ids = {j.id for j in net.junctions}
    tank_ids = {t.id for t in net.tanks}
    tanks = {t.id: t for t in net.tanks}

    by_time: dict[float, list[tuple[str, str, float]]] = {}
    for t, eid, quantity, value in _parse_rows(text):
        by_time.setdefault(t, []).append((eid, quantity, value))

    starts = sorted(by_time)
    if not starts:
        raise HydraulicsError("hydraulics file has no data rows")

    warnings: list[str] = []
    flows: dict[str, float] = {eid: 0.0 for eid in link_ids | booster_ids}
    demands: dict[str, float] = {jid: 0.0 for jid in junction_ids}
    tank_demands: dict[str, float] = {tid: 0.0 for tid in tank_ids}
    provided_volumes: dict[str, float] = {}

    raw_steps: list[tuple[float, float | None, dict, dict, dict, dict]] = []
    for k, start in enumerate(starts):
        duration = None
        provided_volumes = {}
        for eid, quantity, value in by_time[start]:
            if quantity == "duration_s":
                if value <= 0:
                    raise HydraulicsError(f"step at {start} s: nonpositive duration")
                duration = value
                continue
            if quantity == "flow_m3s":
                if eid not in flows:
                    raise HydraulicsError(f"unknown link/booster id {eid!r}")
                if eid in booster_ids and value < 0:
                    raise HydraulicsError(f"booster {eid!r}: negative injection flow")
                flows[eid] = value
            elif quantity == "demand_m3s":
                if eid in junction_ids:
                    if value < 0:
                        raise HydraulicsError(f"junction {eid!r}: negative demand")
                    demands[eid] = value
                elif eid in tank_ids:
                    if value < 0:
                        raise HydraulicsError(f"tank {eid!r}: negative demand")
                    tank_demands[eid] = value
                else:
                    raise HydraulicsError(f"unknown demand element {eid!r}")
            elif quantity == "tank_volume_m3":
                if eid not in tank_ids:
                    raise HydraulicsError(f"tank_volume_m3 for non-tank {eid!r}")
                provided_volumes[eid] = value
        if duration is None:
            if k + 1 < len(starts):
                duration = starts[k + 1] - start
            else:
                raise HydraulicsError(
                    f"final step at {start} s needs an explicit duration_s row"
                )
        raw_steps.append(
            (start, duration, dict(flows), dict(demands), dict(tank_demands),
             provided_volumes)
        )

    # contiguity
    for (s0, d0, *_), (s1, *_rest) in zip(raw_steps, raw_steps[1:]):
        boundary = s0 + d0
        if boundary < s1 - 1e-9:
            raise HydraulicsError(f"time gap between {boundary} s and {s1} s")
        if boundary > s1 + 1e-9:
            raise HydraulicsError(f"steps overlap at {s1} s (previous ends {boundary} s)")

    # recompute tank volume trajectory from flows for mass consistency
    volumes: dict[str, float] = {}
    for tid, spec in tanks.items():
        provided = raw_steps[0][5].get(tid)
        volumes[tid] = provided if provided is not None else spec.v_init

    steps: list[HydraulicStep] = []
    for start, duration, fl, dm, tdm, provided in raw_steps:
        if steps:  # cross-check restated volumes against the recomputed ones
            for tid, v_given in provided.items():
                v_calc = volumes[tid]
                if v_given > 0 and abs(v_calc - v_given) > 0.01 * abs(v_given):
                    warnings.append(
                        f"tank {tid}: provided volume {v_given} m3 at {start} s "
                        f"differs from recomputed {v_calc:.6g} m3 by >1%"
                    )
        steps.append(
            HydraulicStep(start, duration, fl, dm, tdm, dict(volumes))
        )
        for tid, spec in tanks.items():
            net_in = _tank_net_inflow(net, tid, fl, tdm)
            volumes[tid] += net_in * duration
            if not (spec.v_min - 1e-9 <= volumes[tid] <= spec.v_max + 1e-9):
                raise HydraulicsError(
                    f"tank {tid}: recomputed volume {volumes[tid]:.6g} m3 at "
                    f"{start + duration} s violates [{spec.v_min}, {spec.v_max}]"
                )

    _check_junction_balance(net, steps, warnings)
    for w in warnings:
        log.warning(w)
    return HydraulicSchedule(steps, warnings)


def _tank_net_inflow(
    net: NetworkTopology, tank_id: str, flows: dict[str, float],
    tank_demands: dict[str, float],
) -> float:
    total = -tank_demands.get(tank_id, 0.0)
    for link in net.links:
        q = flows.get(link.id, 0.0)
        if link.to_node == tank_id:
            total += q
        elif link.from_node == tank_id:
            total -= q
    for b in net.boosters:
        if b.kind == "volume_based" and b.node == tank_id:
            total += flows.get(b.id, 0.0)
    return total


def _check_junction_balance(
    net: NetworkTopology, steps: list[HydraulicStep], warnings: list[str]
) -> None:
    for step in steps:
        for j in net.junctions:
            inflow = outflow = 0.0
            for link in net.links:
                q = step.flows.get(link.id, 0.0)
                if link.to_node == j.id:
                    inflow += max(q, 0.0)
                    outflow += max(-q, 0.0)
                elif link.from_node == j.id:
                    inflow += max(-q, 0.0)
                    outflow += max(q, 0.0)
            for b in net.boosters:
                if b.kind == "flow_paced" and b.node == j.id:
                    inflow += step.flows.get(b.id, 0.0)
            outflow += step.demands.get(j.id, 0.0)
            scale = max(inflow, outflow, 1e-12)
            if abs(inflow - outflow) > 1e-6 * scale and abs(inflow - outflow) > 1e-12:
                warnings.append(
                    f"junction {j.id}: flow imbalance {inflow - outflow:.3g} m3/s "
                    f"in step starting {step.start} s"
                )


def pipe_velocities(net: NetworkTopology, schedule: HydraulicSchedule) -> np.ndarray:
    """Signed mean velocity, shape [pipe, step], pipe order as in the topology."""
    out = np.zeros((len(net.pipes), len(schedule.steps)))
    for i, pipe in enumerate(net.pipes):
        for k, step in enumerate(schedule.steps):
            out[i, k] = mean_velocity(step.flows.get(pipe.id, 0.0), pipe.radius)
    return out


def build_fixed_grid(
    net: NetworkTopology, schedule: HydraulicSchedule, dt: float
) -> DiscretizationGrid:
    """Fix per-pipe segment counts from the worst-case velocity.

    s_i = floor(L_i / (max_t |v_i| dt)), clamped to >= 1, so the Courant
    number stays in [0, 1] for every hydraulic step (except for stagnant or
    clamped pipes, which are flagged).
    """
    if dt <= 0:
        raise ValueError("quality time-step dt must be positive")
    for step in schedule.steps:
        ratio = step.duration / dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise HydraulicsError(
                f"dt={dt} s does not divide the hydraulic step of "
                f"{step.duration} s starting at {step.start} s"
            )

    warnings: list[str] = []
    v = np.abs(pipe_velocities(net, schedule))
    vmax = v.max(axis=1) if v.size else np.zeros(len(net.pipes))
    segments = np.ones(len(net.pipes), dtype=int)
    for i, pipe in enumerate(net.pipes):
        if vmax[i] <= 0:
            warnings.append(
                f"pipe {pipe.id}: stagnant over the whole schedule; "
                "treated as a single pure-reaction segment"
            )
            continue
        s = math.floor(pipe.length / (vmax[i] * dt))
        if s < 1:
            warnings.append(
                f"pipe {pipe.id}: travel time below dt; segment count clamped to 1 "
                "(Courant number will exceed 1)"
            )
            s = 1
        segments[i] = s
    seg_length = np.array([p.length for p in net.pipes]) / segments
    for w in warnings:
        log.warning(w)
    return DiscretizationGrid(
        [p.id for p in net.pipes], segments, seg_length, dt, warnings
    )


def courant_numbers(
    grid: DiscretizationGrid, net: NetworkTopology, schedule: HydraulicSchedule
) -> CourantField:
    """Per-pipe, per-hydraulic-step Courant numbers and flow directions."""
    if grid.pipe_ids != [p.id for p in net.pipes]:
        raise ValueError("grid and network pipe sets differ")
    v = pipe_velocities(net, schedule)
    courant = np.abs(v) * grid.dt / grid.seg_length[:, None]
    direction = np.where(v < 0, -1, 1)
    return CourantField(
        grid.pipe_ids, [s.start for s in schedule.steps], courant, direction
    )


def cfl_report(field: CourantField, tol: float = 1e-12) -> CflReport:
    """Flag Courant numbers above 1 (violations) and equal to 0 (stagnant)."""
    violations = []
    stagnant = []
    for i, pid in enumerate(field.pipe_ids):
        for k, start in enumerate(field.step_starts):
            lam = field.courant[i, k]
            if lam > 1 + tol:
                violations.append((pid, start, float(lam)))
            elif lam == 0:
                stagnant.append((pid, start))
    return CflReport(violations, stagnant)
