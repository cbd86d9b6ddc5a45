"""Time-stepping driver for the two-species state-space systems.

Loop order: for each hydraulic step, refresh flow directions (reversing pipe
segment values where the sign flipped), assemble both species' systems, then
march quality steps of length dt. Within a hydraulic step only the tank rows
change (their volumes drift every quality step), so those entries are patched
in place instead of reassembling; the method of characteristics rebuilds A
every step regardless because it folds the other species' state into the
coefficients.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .analysis import Diagnostics, SimulationResult
from .errors import HydraulicsError, ScenarioError, SolverError
from .hydraulics import (
    DiscretizationGrid,
    HydraulicSchedule,
    _tank_net_inflow,
    build_fixed_grid,
    courant_numbers,
)
from .network import NetworkTopology
from .scenario import Scenario, SensorSpec
from .schemes import AssemblyContext, StateLayout, assemble

log = logging.getLogger("aquanet")

RESIDUAL_LIMIT = 1e-10
_T_EPS = 1e-6


@dataclass
class SpeciesState:
    """Both species' concentration vectors at one instant."""

    t: float
    x1: np.ndarray
    x2: np.ndarray

    def copy(self) -> "SpeciesState":
        return SpeciesState(self.t, self.x1.copy(), self.x2.copy())

    def species(self, s: int) -> np.ndarray:
        return self.x1 if s == 1 else self.x2


@dataclass
class MeasurementMap:
    """Resolved sensor -> state-index bindings for one layout."""

    sensors: list[SensorSpec]
    indices: list[int]

    @classmethod
    def build(cls, layout: StateLayout, sensors: list[SensorSpec]) -> "MeasurementMap":
        indices = []
        for s in sensors:
            try:
                indices.append(layout.state_index(s.element, s.segment))
            except KeyError as exc:
                raise ScenarioError(f"sensor {s.id}: {exc}") from None
        return cls(list(sensors), indices)


def measure_outputs(mmap: MeasurementMap, state: SpeciesState) -> dict[str, float]:
    return {
        s.id: float(state.species(s.species)[i])
        for s, i in zip(mmap.sensors, mmap.indices)
    }


def build_input(
    layout: StateLayout, net: NetworkTopology, scenario: Scenario,
    t: float, species: int,
) -> np.ndarray:
    """Injection vector u: one entry per booster, zero for the other species."""
    u = np.zeros(layout.n_u)
    for b in net.boosters:
        if b.species == species:
            u[layout.booster_col[b.id]] = scenario.booster_value(b.id, t)
    return u


def initial_state(
    layout: StateLayout, net: NetworkTopology, scenario: Scenario
) -> SpeciesState:
    """Zero state overlaid with [INITIAL] values and reservoir [SOURCES]."""
    x1 = np.zeros(layout.n_x)
    x2 = np.zeros(layout.n_x)
    vecs = {1: x1, 2: x2}
    for eid, species, conc in scenario.initial:
        x = vecs[species]
        if eid in layout.pipe_start:
            x[layout.pipe_slice(eid)] = conc
        elif eid in layout.index:
            x[layout.index[eid]] = conc
        else:
            raise ScenarioError(f"initial condition for unknown element {eid!r}")
    for nid, species, conc in scenario.sources:
        if net.node_kind(nid) != "reservoir":
            raise ScenarioError(
                f"source at {nid!r}: fixed sources must sit on a reservoir"
            )
        vecs[species][layout.index[nid]] = conc
    return SpeciesState(0.0, x1, x2)


def apply_flow_reversal(
    state: SpeciesState, layout: StateLayout,
    old_direction: np.ndarray, new_direction: np.ndarray,
) -> list[str]:
    """Reverse segment values of pipes whose flow sign flipped (in place).

    Segment 1 always holds the upstream end for the current direction, so a
    sign change is a pure relabeling of the stored values.
    """
    flipped = []
    for i, pid in enumerate(layout.grid.pipe_ids):
        if old_direction[i] != new_direction[i]:
            sl = layout.pipe_slice(pid)
            state.x1[sl] = state.x1[sl][::-1]
            state.x2[sl] = state.x2[sl][::-1]
            flipped.append(pid)
    return flipped


def _csr_entry(m, row: int, col: int) -> int:
    """Position of (row, col) inside a csr matrix's data array."""
    lo, hi = m.indptr[row], m.indptr[row + 1]
    for k in range(lo, hi):
        if m.indices[k] == col:
            return int(k)
    raise KeyError(f"no stored entry at ({row}, {col})")


@dataclass
class _MocPatch:
    """Positions and constants for in-place updates of MoC pipe rows.

    The sparsity pattern of A is fixed within a hydraulic step; only the
    exponential reaction fold-in changes with the other species' state, so
    the data array is overwritten instead of reassembling.
    """

    pos_prev: np.ndarray  # positions in A.data of the upstream-segment weights
    pos_self: np.ndarray
    idx_prev: np.ndarray  # state indices feeding the exponent
    idx_self: np.ndarray
    lam: np.ndarray
    kp: np.ndarray


def _moc_patch(system, ctx: AssemblyContext, species: int) -> _MocPatch:
    pos_prev, pos_self, idx_prev, idx_self = [], [], [], []
    lam_all, kp_all = [], []
    layout = ctx.layout
    for i, pipe in enumerate(ctx.net.pipes):
        s = layout.pipe_segments[pipe.id]
        if s < 2:
            continue
        start = layout.pipe_start[pipe.id]
        rows = np.arange(start + 1, start + s)
        # each interior row holds exactly (s-1, s), already column-sorted
        base = system.A.indptr[rows]
        pos_prev.append(base)
        pos_self.append(base + 1)
        idx_prev.append(rows - 1)
        idx_self.append(rows)
        lam_all.append(np.full(rows.size, float(ctx.courant[i])))
        kp_all.append(np.full(rows.size, ctx.pipe_kp(pipe, species)))
    if not pos_prev:
        empty = np.empty(0, dtype=int)
        return _MocPatch(empty, empty, empty, empty, empty.astype(float),
                         empty.astype(float))
    return _MocPatch(
        np.concatenate(pos_prev), np.concatenate(pos_self),
        np.concatenate(idx_prev), np.concatenate(idx_self),
        np.concatenate(lam_all), np.concatenate(kp_all),
    )


def _apply_moc_patch(system, patch: _MocPatch, ctx: AssemblyContext,
                     x_other: np.ndarray) -> None:
    if not patch.pos_prev.size:
        return
    kr, dt = ctx.reactions.k_r, ctx.dt
    system.A.data[patch.pos_prev] = patch.lam * np.exp(
        -(patch.kp + kr * x_other[patch.idx_prev]) * dt
    )
    system.A.data[patch.pos_self] = (1.0 - patch.lam) * np.exp(
        -(patch.kp + kr * x_other[patch.idx_self]) * dt
    )


@dataclass
class _TankPatch:
    """Data-array positions of one tank's A/B/f entries for in-place updates."""

    tank_id: str
    a_pos: dict[int, int]  # state col -> position in A.data
    b_pos: dict[int, int]  # input col -> position in B.data
    f_pos: int  # index into f_coeffs


def _tank_patches(system, ctx: AssemblyContext, species: int) -> list[_TankPatch]:
    from .schemes import tank_row

    patches = []
    for t in ctx.net.tanks:
        row = ctx.layout.index[t.id]
        entries, b_entries, _ = tank_row(ctx, t.id, species)
        a_pos = {c: _csr_entry(system.A, row, c) for c in entries}
        b_pos = {c: _csr_entry(system.B, row, c) for c in b_entries}
        (f_pos,) = np.nonzero(system.f_rows == row)[0]
        patches.append(_TankPatch(t.id, a_pos, b_pos, int(f_pos)))
    return patches


def _apply_tank_patches(system, patches, ctx: AssemblyContext, species: int):
    from .schemes import tank_row

    for p in patches:
        entries, b_entries, f_coeff = tank_row(ctx, p.tank_id, species)
        for c, v in entries.items():
            system.A.data[p.a_pos[c]] = v
        for c, v in b_entries.items():
            system.B.data[p.b_pos[c]] = v
        system.f_coeffs[p.f_pos] = f_coeff


@dataclass
class _Recorder:
    net: NetworkTopology
    record_all: bool
    boundaries: list[float]
    single_phase: bool
    times: list[float] = field(default_factory=list)
    series: dict = field(default_factory=dict)
    segments: dict = field(default_factory=dict)

    def wants(self, t: float, dt: float) -> bool:
        if self.record_all:
            return True
        return any(abs(t - b) < dt * _T_EPS for b in self.boundaries)

    def record(self, layout: StateLayout, state: SpeciesState):
        self.times.append(state.t)
        for species in (1, 2):
            x = state.species(species)
            for eid, i in layout.index.items():
                self.series.setdefault((eid, species), []).append(float(x[i]))
            for pid in layout.pipe_start:
                seg = x[layout.pipe_slice(pid)]
                self.series.setdefault((pid, species), []).append(float(seg.mean()))
                if self.single_phase:
                    self.segments.setdefault((pid, species), []).append(seg.copy())


def _phase_grid(
    net: NetworkTopology, schedule: HydraulicSchedule, dt: float,
    t0: float, t1: float,
) -> DiscretizationGrid:
    """Fixed grid sized from the worst velocity among steps touching [t0, t1)."""
    active = [
        k for k, s in enumerate(schedule.steps)
        if s.start < t1 - 1e-9 and s.end > t0 + 1e-9
    ]
    sub = HydraulicSchedule([schedule.steps[k] for k in active])
    return build_fixed_grid(net, sub, dt)


def _transfer_state(
    old_layout: StateLayout, old: SpeciesState, new_layout: StateLayout
) -> SpeciesState:
    """Map a state onto a regridded layout; pipe profiles are interpolated."""
    x1 = np.zeros(new_layout.n_x)
    x2 = np.zeros(new_layout.n_x)
    for eid, i in new_layout.index.items():
        j = old_layout.index[eid]
        x1[i], x2[i] = old.x1[j], old.x2[j]
    for pid in new_layout.pipe_start:
        s_old = old_layout.pipe_segments[pid]
        s_new = new_layout.pipe_segments[pid]
        old_pos = (np.arange(s_old) + 0.5) / s_old
        new_pos = (np.arange(s_new) + 0.5) / s_new
        sl_old, sl_new = old_layout.pipe_slice(pid), new_layout.pipe_slice(pid)
        x1[sl_new] = np.interp(new_pos, old_pos, old.x1[sl_old])
        x2[sl_new] = np.interp(new_pos, old_pos, old.x2[sl_old])
    return SpeciesState(old.t, x1, x2)


def run_simulation(
    net: NetworkTopology, schedule: HydraulicSchedule, scenario: Scenario
) -> SimulationResult:
    """March both species from t=0 to the scenario duration."""
    if scenario.scheme == "ltd":
        from .ltd import ltd_run

        return ltd_run(net, schedule, scenario)

    dt = scenario.dt
    duration = scenario.duration
    if duration > schedule.horizon + 1e-9:
        raise HydraulicsError(
            f"scenario duration {duration} s exceeds the hydraulic "
            f"horizon {schedule.horizon} s"
        )
    for rt in scenario.regrid_times:
        if not 0 < rt < duration:
            raise ScenarioError(f"regrid time {rt} s outside (0, duration)")
        if abs(rt / dt - round(rt / dt)) > 1e-9:
            raise ScenarioError(f"regrid time {rt} s is not a multiple of dt")

    phase_edges = [0.0, *scenario.regrid_times, duration]
    single_phase = len(phase_edges) == 2
    boundaries = [s.start for s in schedule.steps if s.start <= duration + 1e-9]
    boundaries.append(duration)
    recorder = _Recorder(net, scenario.record_all, boundaries, single_phase)
    diag = Diagnostics(min_value={1: math.inf, 2: math.inf})
    sensor_times: list[float] = []
    sensor_values: dict[str, list[float]] = {s.id: [] for s in scenario.sensors}

    tank_v = dict(schedule.steps[0].tank_volumes)
    state: SpeciesState | None = None
    layout: StateLayout | None = None

    for t0, t1 in zip(phase_edges, phase_edges[1:]):
        grid = (
            build_fixed_grid(net, schedule, dt)
            if single_phase
            else _phase_grid(net, schedule, dt, t0, t1)
        )
        diag.warnings.extend(grid.warnings)
        new_layout = StateLayout(net, grid)
        cfield = courant_numbers(grid, net, schedule)
        if state is None:
            state = initial_state(new_layout, net, scenario)
        else:
            state = _transfer_state(layout, state, new_layout)
        layout = new_layout
        mmap = MeasurementMap.build(layout, scenario.sensors)

        if t0 == 0.0:
            recorder.record(layout, state)
            sensor_times.append(0.0)
            for sid, v in measure_outputs(mmap, state).items():
                sensor_values[sid].append(v)

        n_steps = round((t1 - t0) / dt)
        hyd_k = None
        direction = None
        systems = {}
        patches = {}
        lu = None
        ctx = None

        for m in range(n_steps):
            t = t0 + m * dt
            k = _step_index(schedule, t)
            step = schedule.steps[k]

            # tank volumes over this quality step
            v_next = {
                tid: v + _tank_net_inflow(net, tid, step.flows, step.tank_demands) * dt
                for tid, v in tank_v.items()
            }
            ctx = AssemblyContext(
                net=net, layout=layout, grid=grid, reactions=scenario.reactions,
                dt=dt, step=step, courant=cfield.courant[:, k],
                direction=cfield.direction[:, k],
                tank_v_now=dict(tank_v), tank_v_next=v_next,
            )

            if k != hyd_k:
                if direction is not None:
                    flipped = apply_flow_reversal(
                        state, layout, direction, cfield.direction[:, k]
                    )
                    for pid in flipped:
                        log.info("pipe %s: flow reversed at t=%g s", pid, t)
                direction = cfield.direction[:, k]
                other = {1: state.x2, 2: state.x1}
                systems = {
                    s: assemble(scenario.scheme, ctx, s, x_other=other[s])
                    for s in (1, 2)
                }
                patches = {s: _tank_patches(systems[s], ctx, s) for s in (1, 2)}
                if scenario.scheme == "moc":
                    moc_patches = {s: _moc_patch(systems[s], ctx, s) for s in (1, 2)}
                diag.warnings.extend(systems[1].warnings)
                lu = (
                    None
                    if systems[1].identity_e
                    else spla.splu(systems[1].E.tocsc())
                )
                hyd_k = k

            for s in (1, 2):
                _apply_tank_patches(systems[s], patches[s], ctx, s)
            if scenario.scheme == "moc":
                _apply_moc_patch(systems[1], moc_patches[1], ctx, state.x2)
                _apply_moc_patch(systems[2], moc_patches[2], ctx, state.x1)

            t_new = t + dt
            new_x = {}
            for s in (1, 2):
                sys_s = systems[s]
                u = build_input(layout, net, scenario, t_new, s)
                rhs = sys_s.A @ state.species(s) + sys_s.f_vector(state.x1, state.x2)
                if sys_s.B.nnz:
                    rhs += sys_s.B @ u
                if sys_s.identity_e:
                    x_new = rhs
                else:
                    x_new = lu.solve(rhs)
                    resid = np.abs(sys_s.E @ x_new - rhs).max()
                    diag.max_solve_residual = max(diag.max_solve_residual, resid)
                    if resid > RESIDUAL_LIMIT:
                        raise SolverError(
                            f"linear solve residual {resid:.3g} exceeds "
                            f"{RESIDUAL_LIMIT} at t={t_new} s"
                        )
                new_x[s] = x_new

            for s in (1, 2):
                x_new = new_x[s]
                diag.min_value[s] = min(diag.min_value[s], float(x_new.min()))
                if scenario.clamp_negative:
                    neg = x_new < 0
                    diag.clamped_entries += int(neg.sum())
                    x_new[neg] = 0.0
            state = SpeciesState(t_new, new_x[1], new_x[2])
            tank_v = v_next

            sensor_times.append(t_new)
            for sid, v in measure_outputs(mmap, state).items():
                sensor_values[sid].append(v)
            if recorder.wants(t_new, dt):
                recorder.record(layout, state)

    for s in (1, 2):
        if not math.isfinite(diag.min_value[s]):
            diag.min_value[s] = 0.0
        elif diag.min_value[s] < 0 and not scenario.clamp_negative:
            diag.warnings.append(
                f"species {s}: minimum concentration {diag.min_value[s]:.3g} mg/L "
                "went negative (numerical under/overshoot)"
            )
    order = [eid for eid in net.element_ids() if (eid, 1) in recorder.series]
    return SimulationResult(
        scheme=scenario.scheme,
        times=np.array(recorder.times),
        series={k: np.array(v) for k, v in recorder.series.items()},
        pipe_segments={k: np.vstack(v) for k, v in recorder.segments.items()},
        sensor_times=np.array(sensor_times),
        sensor_series={k: np.array(v) for k, v in sensor_values.items()},
        diagnostics=diag,
        element_order=order,
    )


def _step_index(schedule: HydraulicSchedule, t: float) -> int:
    for k, step in enumerate(schedule.steps):
        if step.start - 1e-9 <= t < step.end - 1e-9:
            return k
    if t >= schedule.horizon - 1e-9:
        return len(schedule.steps) - 1
    raise HydraulicsError(f"time {t} s outside the hydraulic schedule")
