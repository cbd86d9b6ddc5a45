"""Lagrangian time-driven reference solver.

Each pipe carries an ordered list of variable-sized, non-overlapping water
parcels (upstream first for the current flow direction). Every quality step:
react every parcel (forward Euler), emit exactly |q| dt of volume from the
downstream end, mix nodes, then grow or create an upstream parcel with the
upstream node's concentration. Independent of the grid-based schemes, so it
serves as their cross-validation oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import Diagnostics, SimulationResult
from .errors import HydraulicsError, MassBalanceError, ScenarioError
from .hydraulics import HydraulicSchedule, _tank_net_inflow
from .network import NetworkTopology
from .reactions import pipe_decay_coefficient, tank_decay_coefficient
from .scenario import Scenario

TAU_DEFAULT = 0.01  # mg/L; parcel merge tolerance, applied to both species
MAX_SEGMENTS = 1000

_T_EPS = 1e-6


@dataclass
class LtdSegment:
    volume: float  # m3
    c1: float  # mg/L
    c2: float


@dataclass
class LtdPipeState:
    pipe_id: str
    segments: list[LtdSegment]  # upstream first

    def total_volume(self) -> float:
        return sum(s.volume for s in self.segments)

    def mass(self, species: int) -> float:
        if species == 1:
            return sum(s.volume * s.c1 for s in self.segments)
        return sum(s.volume * s.c2 for s in self.segments)

    def mean(self, species: int) -> float:
        """Volume-weighted mean concentration."""
        v = self.total_volume()
        return self.mass(species) / v if v > 0 else 0.0

    def reverse(self) -> None:
        self.segments.reverse()


def ltd_pipe_step(
    pipe: LtdPipeState,
    inflow_volume: float,
    upstream: tuple[float, float],
    k_p: float,
    k_r: float,
    dt: float,
    tau: float = TAU_DEFAULT,
    max_segments: int = MAX_SEGMENTS,
) -> tuple[float, float]:
    """Advance one pipe by dt; returns the emitted mass of each species.

    Reaction first (all existing parcels), then emission from the downstream
    end, then upstream growth: the head parcel absorbs the inflow when both
    species are within tau of it, otherwise a new parcel is created. Parcels
    created this step do not react until the next one.
    """
    total = pipe.total_volume()
    if inflow_volume < 0:
        raise ValueError("inflow volume must be nonnegative")
    if inflow_volume > total * (1 + 1e-9):
        raise MassBalanceError(
            f"pipe {pipe.pipe_id}: {inflow_volume:.6g} m3 enters in one step but "
            f"the pipe only holds {total:.6g} m3; reduce dt"
        )

    for seg in pipe.segments:
        r = k_r * seg.c1 * seg.c2 * dt
        seg.c1, seg.c2 = seg.c1 - k_p * seg.c1 * dt - r, seg.c2 - r

    mass1 = mass2 = 0.0
    need = inflow_volume
    while need > 0 and pipe.segments:
        tail = pipe.segments[-1]
        take = min(tail.volume, need)
        mass1 += take * tail.c1
        mass2 += take * tail.c2
        if take >= tail.volume - 1e-15 * total:
            pipe.segments.pop()
            need -= tail.volume
        else:
            tail.volume -= take
            need = 0.0

    if inflow_volume > 0:
        c1_in, c2_in = upstream
        head = pipe.segments[0] if pipe.segments else None
        if head is not None and abs(c1_in - head.c1) <= tau and abs(c2_in - head.c2) <= tau:
            v_new = head.volume + inflow_volume
            head.c1 = (head.volume * head.c1 + inflow_volume * c1_in) / v_new
            head.c2 = (head.volume * head.c2 + inflow_volume * c2_in) / v_new
            head.volume = v_new
        else:
            pipe.segments.insert(0, LtdSegment(inflow_volume, c1_in, c2_in))

    while len(pipe.segments) > max_segments:
        _merge_smallest_adjacent(pipe)
    return mass1, mass2


def _merge_smallest_adjacent(pipe: LtdPipeState) -> None:
    segs = pipe.segments
    best = min(range(len(segs) - 1), key=lambda i: segs[i].volume + segs[i + 1].volume)
    a, b = segs[best], segs[best + 1]
    v = a.volume + b.volume
    merged = LtdSegment(
        v,
        (a.volume * a.c1 + b.volume * b.c1) / v,
        (a.volume * a.c2 + b.volume * b.c2) / v,
    )
    segs[best : best + 2] = [merged]


@dataclass
class _NodeState:
    """Concentrations at nodes, pumps, and valves (one float pair each)."""

    c1: dict[str, float]
    c2: dict[str, float]

    def get(self, eid: str, species: int) -> float:
        return (self.c1 if species == 1 else self.c2)[eid]


def ltd_run(
    net: NetworkTopology, schedule: HydraulicSchedule, scenario: Scenario
) -> SimulationResult:
    """Full-network Lagrangian run with the same inputs/outputs as the engine."""
    dt = scenario.dt
    duration = scenario.duration
    if duration > schedule.horizon + 1e-9:
        raise HydraulicsError(
            f"scenario duration {duration} s exceeds the hydraulic "
            f"horizon {schedule.horizon} s"
        )
    r = scenario.reactions
    k_p = {
        p.id: pipe_decay_coefficient(r.k_b, r.k_w, r.k_f, p.radius)
        for p in net.pipes
    }
    k_tk = tank_decay_coefficient(r.k_b)

    nodes = _NodeState(
        {e.id: 0.0 for e in [*net.reservoirs, *net.junctions, *net.tanks,
                             *net.pumps, *net.valves]},
        {e.id: 0.0 for e in [*net.reservoirs, *net.junctions, *net.tanks,
                             *net.pumps, *net.valves]},
    )
    pipes = {
        p.id: LtdPipeState(p.id, [LtdSegment(p.volume, 0.0, 0.0)]) for p in net.pipes
    }
    for eid, species, conc in scenario.initial:
        if eid in pipes:
            for seg in pipes[eid].segments:
                if species == 1:
                    seg.c1 = conc
                else:
                    seg.c2 = conc
        elif eid in nodes.c1:
            (nodes.c1 if species == 1 else nodes.c2)[eid] = conc
        else:
            raise ScenarioError(f"initial condition for unknown element {eid!r}")
    sources: dict[tuple[str, int], float] = {}
    for nid, species, conc in scenario.sources:
        if net.node_kind(nid) != "reservoir":
            raise ScenarioError(
                f"source at {nid!r}: fixed sources must sit on a reservoir"
            )
        (nodes.c1 if species == 1 else nodes.c2)[nid] = conc
        sources[(nid, species)] = conc

    tank_v = dict(schedule.steps[0].tank_volumes)
    boundaries = [s.start for s in schedule.steps if s.start <= duration + 1e-9]
    boundaries.append(duration)
    diag = Diagnostics(min_value={1: 0.0, 2: 0.0})
    times: list[float] = []
    series: dict[tuple[str, int], list[float]] = {}
    sensor_times: list[float] = []
    sensor_values: dict[str, list[float]] = {s.id: [] for s in scenario.sensors}
    for s in scenario.sensors:
        if s.element not in pipes and s.element not in nodes.c1:
            raise ScenarioError(f"sensor {s.id}: unknown element {s.element!r}")

    def sense(sensor) -> float:
        if sensor.element in pipes:
            return pipes[sensor.element].mean(sensor.species)
        return nodes.get(sensor.element, sensor.species)

    def record(t: float) -> None:
        times.append(t)
        for species in (1, 2):
            vals = nodes.c1 if species == 1 else nodes.c2
            for eid, v in vals.items():
                series.setdefault((eid, species), []).append(v)
            for pid, p in pipes.items():
                series.setdefault((pid, species), []).append(p.mean(species))

    record(0.0)
    sensor_times.append(0.0)
    for s in scenario.sensors:
        sensor_values[s.id].append(sense(s))

    n_steps = round(duration / dt)
    prev_dir: dict[str, int] = {}
    cur_step = None
    for m in range(n_steps):
        t = m * dt
        step = _step_at(schedule, t)
        t_new = t + dt

        if step is not cur_step:
            cur_step = step
            # flow reversal: relabel parcel order
            for p in net.pipes:
                d = 1 if step.flows.get(p.id, 0.0) >= 0 else -1
                if prev_dir.get(p.id, d) != d:
                    pipes[p.id].reverse()
                prev_dir[p.id] = d
            up_node = {
                p.id: (p.from_node if step.flows.get(p.id, 0.0) >= 0 else p.to_node)
                for p in net.pipes
            }
            # static per-step mixing tables: (link id, is_pipe, q_abs) inflows
            inflow_links: dict[str, list[tuple[str, bool, float]]] = {}
            outflow: dict[str, float] = {}
            for link in net.links:
                q = step.flows.get(link.id, 0.0)
                if q == 0:
                    continue
                head = link.to_node if q > 0 else link.from_node
                tail = link.from_node if q > 0 else link.to_node
                inflow_links.setdefault(head, []).append(
                    (link.id, link.id in pipes, abs(q))
                )
                outflow[tail] = outflow.get(tail, 0.0) + abs(q)
            junction_denom = {
                j.id: step.demands.get(j.id, 0.0) + outflow.get(j.id, 0.0)
                for j in net.junctions
            }
            tank_q_out = {
                tk.id: outflow.get(tk.id, 0.0) + step.tank_demands.get(tk.id, 0.0)
                for tk in net.tanks
            }
            tank_net_in = {
                tk.id: _tank_net_inflow(net, tk.id, step.flows, step.tank_demands)
                for tk in net.tanks
            }

        # advance pipes; emitted mass feeds this step's node mixing
        out_mass: dict[str, tuple[float, float]] = {}
        for p in net.pipes:
            q = abs(step.flows.get(p.id, 0.0))
            up = up_node[p.id]
            out_mass[p.id] = ltd_pipe_step(
                pipes[p.id], q * dt, (nodes.c1[up], nodes.c2[up]),
                k_p[p.id], r.k_r, dt,
            )

        v_next = {tid: v + tank_net_in[tid] * dt for tid, v in tank_v.items()}

        new_c1 = dict(nodes.c1)
        new_c2 = dict(nodes.c2)

        def inflow_qc(node_id: str, species: int) -> float:
            """Sum of q_in * c_in into node_id (mass flow averaged over dt)."""
            qc = 0.0
            for lid, is_pipe, q_abs in inflow_links.get(node_id, ()):
                if is_pipe:
                    qc += out_mass[lid][species - 1] / dt
                else:
                    qc += q_abs * nodes.get(lid, species)
            return qc

        for j in net.junctions:
            denom = junction_denom[j.id]
            if denom <= 0:
                continue  # stagnant: hold the previous value
            for species, target in ((1, new_c1), (2, new_c2)):
                qc = inflow_qc(j.id, species)
                for b in net.boosters:
                    if b.kind == "flow_paced" and b.node == j.id and b.species == species:
                        qc += step.flows.get(b.id, 0.0) * scenario.booster_value(
                            b.id, t_new
                        )
                target[j.id] = qc / denom

        for tk in net.tanks:
            v_now = tank_v[tk.id]
            vn = v_next[tk.id]
            if vn <= 0:
                raise MassBalanceError(
                    f"tank {tk.id}: volume {vn:.6g} m3 is not positive"
                )
            q_out = tank_q_out[tk.id]
            c1, c2 = nodes.c1[tk.id], nodes.c2[tk.id]
            mutual = r.k_r * c1 * c2 * dt * v_now
            for species, target, c, k in ((1, new_c1, c1, k_tk), (2, new_c2, c2, 0.0)):
                qc = inflow_qc(tk.id, species)
                mass = ((1.0 - k * dt) * v_now - q_out * dt) * c + qc * dt - mutual
                for b in net.boosters:
                    if b.kind == "volume_based" and b.node == tk.id and b.species == species:
                        v_b = step.flows.get(b.id, 0.0) * dt
                        mass += v_b * scenario.booster_value(b.id, t_new)
                target[tk.id] = mass / vn

        for link in [*net.pumps, *net.valves]:
            q = step.flows.get(link.id, 0.0)
            up = link.from_node if q >= 0 else link.to_node
            new_c1[link.id] = nodes.c1[up]
            new_c2[link.id] = nodes.c2[up]

        for (nid, species), conc in sources.items():
            (new_c1 if species == 1 else new_c2)[nid] = conc

        nodes = _NodeState(new_c1, new_c2)
        tank_v = v_next

        for species, vals in ((1, new_c1), (2, new_c2)):
            low = min(vals.values())
            diag.min_value[species] = min(diag.min_value[species], low)
            if scenario.clamp_negative:
                for eid, v in vals.items():
                    if v < 0:
                        vals[eid] = 0.0
                        diag.clamped_entries += 1

        sensor_times.append(t_new)
        for s in scenario.sensors:
            sensor_values[s.id].append(sense(s))
        if scenario.record_all or any(abs(t_new - b) < dt * _T_EPS for b in boundaries):
            record(t_new)

    for s in (1, 2):
        if diag.min_value[s] < 0 and not scenario.clamp_negative:
            diag.warnings.append(
                f"species {s}: minimum concentration {diag.min_value[s]:.3g} mg/L "
                "went negative (forward-Euler overshoot)"
            )
    order = [eid for eid in net.element_ids() if (eid, 1) in series]
    return SimulationResult(
        scheme="ltd",
        times=np.array(times),
        series={k: np.array(v) for k, v in series.items()},
        sensor_times=np.array(sensor_times),
        sensor_series={k: np.array(v) for k, v in sensor_values.items()},
        diagnostics=diag,
        element_order=order,
    )


def _step_at(schedule: HydraulicSchedule, t: float):
    for step in schedule.steps:
        if step.start - 1e-9 <= t < step.end - 1e-9:
            return step
    if t >= schedule.horizon - 1e-9:
        return schedule.steps[-1]
    raise HydraulicsError(f"time {t} s outside the hydraulic schedule")
