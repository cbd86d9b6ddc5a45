"""Per-step assembly of the sparse state-space system E x(t+dt) = A x(t) + B u(t) + f.

State ordering is [reservoirs | junctions | tanks | pumps | pipe segments
(pipe-major, upstream end first for the current flow direction) | valves].
Four pipe discretizations are supported: explicit Lax-Wendroff (lw),
implicit backward Euler (be), Crank-Nicolson (cn), and the method of
characteristics with a pseudo-first-order reaction fold-in (moc).

Junction mixing, pump/valve pass-through, and reservoir rows are shared by
all techniques and always live in A (explicit). The bilinear mutual-reaction
term is carried as a descriptor (rows, coeffs, idx) evaluating to
coeff * x1[idx] * x2[idx].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import CflViolationError, MassBalanceError
from .hydraulics import CourantField, DiscretizationGrid, HydraulicStep
from .network import NetworkTopology
from .reactions import ReactionParams, pipe_decay_coefficient, tank_decay_coefficient

CFL_TOL = 1e-12


@dataclass
class StateLayout:
    """Index bookkeeping for the concentration state vector."""

    net: NetworkTopology
    grid: DiscretizationGrid

    def __post_init__(self):
        net = self.net
        self.index: dict[str, int] = {}
        pos = 0
        for group in (net.reservoirs, net.junctions, net.tanks, net.pumps):
            for e in group:
                self.index[e.id] = pos
                pos += 1
        self.pipe_start: dict[str, int] = {}
        self.pipe_segments: dict[str, int] = {}
        for pid, s in zip(self.grid.pipe_ids, self.grid.segments):
            self.pipe_start[pid] = pos
            self.pipe_segments[pid] = int(s)
            pos += int(s)
        for v in net.valves:
            self.index[v.id] = pos
            pos += 1
        self.n_x = pos
        self.booster_ids = [b.id for b in net.boosters]
        self.n_u = len(self.booster_ids)
        self.booster_col = {bid: k for k, bid in enumerate(self.booster_ids)}

    def pipe_slice(self, pipe_id: str) -> slice:
        start = self.pipe_start[pipe_id]
        return slice(start, start + self.pipe_segments[pipe_id])

    def state_index(self, element_id: str, segment: int = 1) -> int:
        """Index of a node/pump/valve state, or of a 1-based pipe segment."""
        if element_id in self.index:
            return self.index[element_id]
        if element_id in self.pipe_start:
            s = self.pipe_segments[element_id]
            if not 1 <= segment <= s:
                raise KeyError(f"pipe {element_id} has segments 1..{s}")
            return self.pipe_start[element_id] + segment - 1
        raise KeyError(f"unknown element {element_id!r}")

    def labels(self) -> list[str]:
        out = [""] * self.n_x
        for eid, i in self.index.items():
            out[i] = eid
        for pid, start in self.pipe_start.items():
            for k in range(self.pipe_segments[pid]):
                out[start + k] = f"{pid}[{k + 1}]"
        return out


@dataclass(frozen=True)
class LwWeights:
    under: float  # weight on the upstream neighbor
    center: float
    over: float  # weight on the downstream neighbor


def lw_weights(lam: float) -> LwWeights:
    """Lax-Wendroff weights for Courant number lam in [0, 1]."""
    if not (-CFL_TOL <= lam <= 1 + CFL_TOL):
        raise CflViolationError(
            f"Courant number {lam} outside [0, 1]; Lax-Wendroff is only "
            "conditionally stable"
        )
    return LwWeights(
        under=0.5 * lam * (1.0 + lam),
        center=1.0 - lam * lam,
        over=-0.5 * lam * (1.0 - lam),
    )


@dataclass
class StateSpaceSystem:
    E: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix  # n_x x n_u
    f_rows: np.ndarray
    f_coeffs: np.ndarray
    f_idx: np.ndarray
    species: int
    identity_e: bool  # True for lw/moc: skip the linear solve
    warnings: list[str] = field(default_factory=list)

    def f_vector(self, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
        out = np.zeros(self.A.shape[0])
        if self.f_rows.size:
            np.add.at(out, self.f_rows, self.f_coeffs * x1[self.f_idx] * x2[self.f_idx])
        return out

    def dump_coordinates(self) -> str:
        """E, A, B in `row col value` triplet text, for inspection/golden files."""
        chunks = []
        for name, m in (("E", self.E), ("A", self.A), ("B", self.B)):
            coo = m.tocoo()
            chunks.append(f"# {name} {m.shape[0]}x{m.shape[1]}")
            order = np.lexsort((coo.col, coo.row))
            chunks.extend(
                f"{coo.row[i]} {coo.col[i]} {float(coo.data[i])!r}" for i in order
            )
        return "\n".join(chunks) + "\n"


@dataclass
class AssemblyContext:
    """Everything a scheme needs for one quality step within a hydraulic step."""

    net: NetworkTopology
    layout: StateLayout
    grid: DiscretizationGrid
    reactions: ReactionParams
    dt: float
    step: HydraulicStep
    courant: np.ndarray  # per pipe, this hydraulic step
    direction: np.ndarray  # per pipe, +1 from->to
    tank_v_now: dict[str, float]
    tank_v_next: dict[str, float]

    def __post_init__(self):
        net = self.net
        self.pipe_by_id = {p.id: p for p in net.pipes}
        self.up_node: dict[str, str] = {}
        self.down_node: dict[str, str] = {}
        for i, p in enumerate(net.pipes):
            if self.direction[i] >= 0:
                self.up_node[p.id], self.down_node[p.id] = p.from_node, p.to_node
            else:
                self.up_node[p.id], self.down_node[p.id] = p.to_node, p.from_node

    def link_flow(self, link_id: str) -> float:
        return self.step.flows.get(link_id, 0.0)

    def pipe_kp(self, pipe, species: int) -> float:
        if species != 1:
            return 0.0
        r = self.reactions
        return pipe_decay_coefficient(r.k_b, r.k_w, r.k_f, pipe.radius)

    def tank_k(self, species: int) -> float:
        return tank_decay_coefficient(self.reactions.k_b) if species == 1 else 0.0

    def inflows(self, node_id: str):
        """(link, source state index, q_in) for every link feeding node_id."""
        out = []
        for link in self.net.links:
            q = self.link_flow(link.id)
            if q > 0 and link.to_node == node_id or q < 0 and link.from_node == node_id:
                if link.id in self.pipe_by_id:
                    src = self.layout.pipe_slice(link.id).stop - 1  # last segment
                else:
                    src = self.layout.index[link.id]
                out.append((link, src, abs(q)))
        return out

    def outflow_sum(self, node_id: str) -> float:
        total = 0.0
        for link in self.net.links:
            q = self.link_flow(link.id)
            if q > 0 and link.from_node == node_id or q < 0 and link.to_node == node_id:
                total += abs(q)
        return total


class _Coo:
    def __init__(self):
        self.rows: list = []
        self.cols: list = []
        self.data: list = []

    def add(self, r, c, v):
        self.rows.append(r)
        self.cols.append(c)
        self.data.append(v)

    def extend(self, r, c, v):
        self.rows.extend(np.asarray(r).tolist())
        self.cols.extend(np.asarray(c).tolist())
        self.data.extend(np.asarray(v).tolist())

    def matrix(self, shape) -> sp.csr_matrix:
        return sp.coo_matrix(
            (self.data, (self.rows, self.cols)), shape=shape
        ).tocsr()


def junction_row(ctx: AssemblyContext, junction_id: str):
    """Mixing coefficients for one junction.

    Returns (row entries {col: coeff}, booster entries {u col: coeff},
    stagnant flag). Inflow coefficients read the previous-step state
    (explicit coupling) for every technique.
    """
    layout = ctx.layout
    row = layout.index[junction_id]
    demand = ctx.step.demands.get(junction_id, 0.0)
    denom = demand + ctx.outflow_sum(junction_id)
    boosters = [
        b for b in ctx.net.boosters
        if b.kind == "flow_paced" and b.node == junction_id
    ]
    if denom <= 0:
        return {row: 1.0}, {}, True
    entries: dict[int, float] = {}
    for _link, src, q_in in ctx.inflows(junction_id):
        entries[src] = entries.get(src, 0.0) + q_in / denom
    b_entries: dict[int, float] = {}
    for b in boosters:
        q_b = ctx.link_flow(b.id)
        if q_b > 0:
            b_entries[layout.booster_col[b.id]] = q_b / denom
    return entries, b_entries, False


def tank_row(ctx: AssemblyContext, tank_id: str, species: int):
    """CSTR balance row for one tank.

    Returns (row entries, booster entries, f entry coeff). The mutual-term
    coefficient applies at the tank's own state index.
    """
    layout = ctx.layout
    row = layout.index[tank_id]
    v_now = ctx.tank_v_now[tank_id]
    v_next = ctx.tank_v_next[tank_id]
    if v_next <= 0:
        raise MassBalanceError(f"tank {tank_id}: volume {v_next:.6g} m3 is not positive")
    q_out = ctx.outflow_sum(tank_id) + ctx.step.tank_demands.get(tank_id, 0.0)
    k_tk = ctx.tank_k(species)
    self_coeff = ((1.0 - k_tk * ctx.dt) * v_now - q_out * ctx.dt) / v_next
    if self_coeff < 0:
        raise MassBalanceError(
            f"tank {tank_id}: over-drained within one step (self-coefficient "
            f"{self_coeff:.3g} < 0); reduce dt"
        )
    entries: dict[int, float] = {row: self_coeff}
    for _link, src, q_in in ctx.inflows(tank_id):
        entries[src] = entries.get(src, 0.0) + q_in * ctx.dt / v_next
    b_entries: dict[int, float] = {}
    for b in ctx.net.boosters:
        if b.kind == "volume_based" and b.node == tank_id:
            v_b = ctx.link_flow(b.id) * ctx.dt  # injected volume this step
            if v_b > 0:
                b_entries[layout.booster_col[b.id]] = v_b / v_next
    f_coeff = -ctx.reactions.k_r * ctx.dt * v_now / v_next
    return entries, b_entries, f_coeff


def _shared_rows(ctx: AssemblyContext, a: _Coo, b: _Coo, species: int, f_acc):
    """Reservoir, junction, tank, pump, and valve rows (common to all schemes)."""
    layout = ctx.layout
    warnings = []
    for r in ctx.net.reservoirs:
        i = layout.index[r.id]
        a.add(i, i, 1.0)
    for j in ctx.net.junctions:
        entries, b_entries, stagnant = junction_row(ctx, j.id)
        row = layout.index[j.id]
        if stagnant:
            warnings.append(f"junction {j.id}: no throughflow; holding concentration")
        for col, v in entries.items():
            a.add(row, col, v)
        for col, v in b_entries.items():
            b.add(row, col, v)
    for t in ctx.net.tanks:
        entries, b_entries, f_coeff = tank_row(ctx, t.id, species)
        row = layout.index[t.id]
        for col, v in entries.items():
            a.add(row, col, v)
        for col, v in b_entries.items():
            b.add(row, col, v)
        f_acc.append((row, f_coeff, row))
    for link in [*ctx.net.pumps, *ctx.net.valves]:
        row = layout.index[link.id]
        q = ctx.link_flow(link.id)
        up = link.from_node if q >= 0 else link.to_node
        a.add(row, layout.index[up], 1.0)
    return warnings


def _pipe_neighbor_cols(ctx: AssemblyContext, pipe_index: int):
    """(segment rows, upstream-neighbor cols, downstream-neighbor cols)."""
    layout = ctx.layout
    pipe = ctx.net.pipes[pipe_index]
    start = layout.pipe_start[pipe.id]
    s = layout.pipe_segments[pipe.id]
    rows = np.arange(start, start + s)
    up_cols = np.concatenate(([layout.index[ctx.up_node[pipe.id]]], rows[:-1]))
    down_cols = np.concatenate((rows[1:], [layout.index[ctx.down_node[pipe.id]]]))
    return rows, up_cols, down_cols


def _finish(ctx, e, a, b, f_acc, species, identity_e, warnings):
    n_x, n_u = ctx.layout.n_x, ctx.layout.n_u
    if identity_e:
        e_mat = sp.identity(n_x, format="csr")
    else:
        e_mat = e.matrix((n_x, n_x))
    f_arr = np.array(f_acc, dtype=float).reshape(-1, 3)
    return StateSpaceSystem(
        E=e_mat,
        A=a.matrix((n_x, n_x)),
        B=b.matrix((n_x, n_u)),
        f_rows=f_arr[:, 0].astype(int),
        f_coeffs=f_arr[:, 1],
        f_idx=f_arr[:, 2].astype(int),
        species=species,
        identity_e=identity_e,
        warnings=warnings,
    )


def assemble_lw(ctx: AssemblyContext, species: int) -> StateSpaceSystem:
    """Explicit Lax-Wendroff system; E is the identity."""
    a, b = _Coo(), _Coo()
    f_acc: list = []
    warnings = _shared_rows(ctx, a, b, species, f_acc)
    kr_dt = -ctx.reactions.k_r * ctx.dt
    for i, pipe in enumerate(ctx.net.pipes):
        w = lw_weights(float(ctx.courant[i]))
        kp = ctx.pipe_kp(pipe, species)
        rows, up_cols, down_cols = _pipe_neighbor_cols(ctx, i)
        a.extend(rows, up_cols, np.full(rows.size, w.under))
        a.extend(rows, rows, np.full(rows.size, w.center - kp * ctx.dt))
        a.extend(rows, down_cols, np.full(rows.size, w.over))
        f_acc.extend((int(r), kr_dt, int(r)) for r in rows)
    return _finish(ctx, None, a, b, f_acc, species, True, warnings)


def _assemble_implicit(ctx: AssemblyContext, species: int, half: float):
    """Shared body for backward Euler (half=0.5) and Crank-Nicolson (half=0.25)."""
    e, a, b = _Coo(), _Coo(), _Coo()
    f_acc: list = []
    warnings = _shared_rows(ctx, a, b, species, f_acc)
    layout = ctx.layout
    for i in range(layout.n_x):
        e.add(i, i, 1.0)
    kr_dt = -ctx.reactions.k_r * ctx.dt
    crank = half == 0.25
    for i, pipe in enumerate(ctx.net.pipes):
        lam = float(ctx.courant[i])
        kp = ctx.pipe_kp(pipe, species)
        rows, up_cols, down_cols = _pipe_neighbor_cols(ctx, i)
        e.extend(rows, up_cols, np.full(rows.size, -half * lam))
        e.extend(rows, down_cols, np.full(rows.size, half * lam))
        a.extend(rows, rows, np.full(rows.size, 1.0 - kp * ctx.dt))
        if crank:
            a.extend(rows, up_cols, np.full(rows.size, half * lam))
            a.extend(rows, down_cols, np.full(rows.size, -half * lam))
        f_acc.extend((int(r), kr_dt, int(r)) for r in rows)
    return _finish(ctx, e, a, b, f_acc, species, False, warnings)


def assemble_be(ctx: AssemblyContext, species: int) -> StateSpaceSystem:
    """Implicit backward Euler system (unconditionally stable)."""
    return _assemble_implicit(ctx, species, 0.5)


def assemble_cn(ctx: AssemblyContext, species: int) -> StateSpaceSystem:
    """Crank-Nicolson system: average of explicit and implicit stencils."""
    return _assemble_implicit(ctx, species, 0.25)


def assemble_moc(
    ctx: AssemblyContext, species: int, x_other: np.ndarray
) -> StateSpaceSystem:
    """Method-of-characteristics system; reaction folds into A exponentially.

    A depends on the previous-step concentrations of the *other* species
    (pseudo-first-order transform), so it must be rebuilt every quality step.
    """
    a, b = _Coo(), _Coo()
    f_acc: list = []
    warnings = _shared_rows(ctx, a, b, species, f_acc)
    layout = ctx.layout
    kr = ctx.reactions.k_r
    for i, pipe in enumerate(ctx.net.pipes):
        lam = float(ctx.courant[i])
        if not (-CFL_TOL <= lam <= 1 + CFL_TOL):
            raise CflViolationError(
                f"pipe {pipe.id}: Courant number {lam} > 1 breaks the MoC "
                "interpolation"
            )
        kp = ctx.pipe_kp(pipe, species)
        rows, up_cols, _ = _pipe_neighbor_cols(ctx, i)
        # first segment copies the upstream node
        a.add(int(rows[0]), int(up_cols[0]), 1.0)
        if rows.size > 1:
            r = rows[1:]
            prev = rows[:-1]
            up_w = lam * np.exp(-(kp + kr * x_other[prev]) * ctx.dt)
            self_w = (1.0 - lam) * np.exp(-(kp + kr * x_other[r]) * ctx.dt)
            a.extend(r, prev, up_w)
            a.extend(r, r, self_w)
    return _finish(ctx, None, a, b, f_acc, species, True, warnings)


ASSEMBLERS = {
    "lw": assemble_lw,
    "be": assemble_be,
    "cn": assemble_cn,
}


def assemble(
    scheme: str, ctx: AssemblyContext, species: int, x_other: np.ndarray | None = None
) -> StateSpaceSystem:
    if scheme == "moc":
        if x_other is None:
            raise ValueError("moc assembly needs the other species' state")
        return assemble_moc(ctx, species, x_other)
    try:
        return ASSEMBLERS[scheme](ctx, species)
    except KeyError:
        raise ValueError(f"unknown scheme {scheme!r}") from None


def make_context(
    net: NetworkTopology,
    layout: StateLayout,
    grid: DiscretizationGrid,
    field_: CourantField,
    reactions: ReactionParams,
    step_index: int,
    step: HydraulicStep,
    tank_v_now: dict[str, float],
    tank_v_next: dict[str, float],
) -> AssemblyContext:
    return AssemblyContext(
        net=net,
        layout=layout,
        grid=grid,
        reactions=reactions,
        dt=grid.dt,
        step=step,
        courant=field_.courant[:, step_index],
        direction=field_.direction[:, step_index],
        tank_v_now=tank_v_now,
        tank_v_next=tank_v_next,
    )
