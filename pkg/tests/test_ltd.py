import math

import numpy as np
import pytest

import aquanet as aq
from aquanet.ltd import (
    MAX_SEGMENTS,
    LtdPipeState,
    LtdSegment,
    ltd_pipe_step,
    ltd_run,
)

from conftest import single_pipe_inputs


def make_pipe(*segs):
    return LtdPipeState("P", [LtdSegment(v, c1, c2) for v, c1, c2 in segs])


def test_full_flush_emits_everything():
    pipe = make_pipe((1.0, 2.0, 0.5), (2.0, 1.0, 0.0))
    m1, m2 = ltd_pipe_step(pipe, 3.0, (0.7, 0.1), k_p=0.0, k_r=0.0, dt=1.0)
    assert m1 == pytest.approx(1.0 * 2.0 + 2.0 * 1.0)
    assert m2 == pytest.approx(1.0 * 0.5)
    # pipe refilled with a single inflow parcel
    assert len(pipe.segments) == 1
    assert pipe.segments[0].volume == pytest.approx(3.0)
    assert pipe.segments[0].c1 == 0.7 and pipe.segments[0].c2 == 0.1


def test_matching_inflow_grows_head_parcel():
    pipe = make_pipe((5.0, 1.0, 0.0), (5.0, 0.0, 0.0))
    ltd_pipe_step(pipe, 2.0, (1.0, 0.0), k_p=0.0, k_r=0.0, dt=1.0)
    assert len(pipe.segments) == 2
    assert pipe.segments[0].volume == pytest.approx(7.0)
    assert pipe.segments[0].c1 == pytest.approx(1.0)


def test_mismatched_inflow_creates_new_parcel():
    pipe = make_pipe((5.0, 1.0, 0.0), (5.0, 0.0, 0.0))
    ltd_pipe_step(pipe, 2.0, (1.5, 0.0), k_p=0.0, k_r=0.0, dt=1.0)
    assert len(pipe.segments) == 3
    assert pipe.segments[0].volume == pytest.approx(2.0)
    assert pipe.segments[0].c1 == 1.5


def test_tau_gates_on_both_species():
    # chlorine matches but the reactant differs by more than tau
    pipe = make_pipe((5.0, 1.0, 0.5))
    ltd_pipe_step(pipe, 1.0, (1.0, 0.6), k_p=0.0, k_r=0.0, dt=1.0, tau=0.01)
    assert len(pipe.segments) == 2


def test_zero_inflow_applies_decay_only():
    pipe = make_pipe((4.0, 2.0, 0.0))
    k_p = 1e-3
    m1, m2 = ltd_pipe_step(pipe, 0.0, (9.9, 9.9), k_p=k_p, k_r=0.0, dt=10.0)
    assert m1 == 0.0 and m2 == 0.0
    assert len(pipe.segments) == 1
    assert pipe.segments[0].c1 == pytest.approx(2.0 * (1.0 - k_p * 10.0))


def test_mutual_reaction_forward_euler():
    pipe = make_pipe((1.0, 2.0, 0.3))
    k_r = 0.05
    ltd_pipe_step(pipe, 0.0, (0.0, 0.0), k_p=0.0, k_r=k_r, dt=1.0)
    r = k_r * 2.0 * 0.3
    assert pipe.segments[0].c1 == pytest.approx(2.0 - r)
    assert pipe.segments[0].c2 == pytest.approx(0.3 - r)


def test_inflow_exceeding_pipe_volume_is_fatal():
    pipe = make_pipe((1.0, 0.0, 0.0))
    with pytest.raises(aq.MassBalanceError, match="reduce dt"):
        ltd_pipe_step(pipe, 1.5, (0.0, 0.0), k_p=0.0, k_r=0.0, dt=1.0)


def test_negative_inflow_rejected():
    pipe = make_pipe((1.0, 0.0, 0.0))
    with pytest.raises(ValueError, match="nonnegative"):
        ltd_pipe_step(pipe, -0.1, (0.0, 0.0), k_p=0.0, k_r=0.0, dt=1.0)


def test_volume_and_mass_conserved_without_reaction():
    rng = np.random.default_rng(42)
    pipe = make_pipe(*[(v, c1, c2) for v, c1, c2 in rng.random((20, 3)) + 0.01])
    total = pipe.total_volume()
    for _ in range(50):
        inflow = rng.random() * total * 0.2
        up = (rng.random() * 3, rng.random())
        before1 = pipe.mass(1)
        before2 = pipe.mass(2)
        m1, m2 = ltd_pipe_step(pipe, inflow, up, k_p=0.0, k_r=0.0, dt=1.0, tau=0.0)
        assert pipe.total_volume() == pytest.approx(total, rel=1e-12)
        assert pipe.mass(1) == pytest.approx(before1 - m1 + inflow * up[0], rel=1e-10)
        assert pipe.mass(2) == pytest.approx(before2 - m2 + inflow * up[1], rel=1e-10)


def test_zero_tau_grows_one_parcel_per_step():
    pipe = make_pipe((10.0, 0.0, 0.0))
    for m in range(5):
        ltd_pipe_step(pipe, 0.5, (float(m + 1), 0.0), k_p=0.0, k_r=0.0, dt=1.0,
                      tau=0.0)
        assert len(pipe.segments) == m + 2


def test_segment_cap_merges_smallest_adjacent():
    pipe = make_pipe((10.0, 0.0, 0.0))
    cap = 8
    for m in range(20):
        ltd_pipe_step(pipe, 0.25, (float(m), 0.0), k_p=0.0, k_r=0.0, dt=1.0,
                      tau=0.0, max_segments=cap)
        assert len(pipe.segments) <= cap
    assert len(pipe.segments) == cap
    assert MAX_SEGMENTS == 1000


def test_merge_conserves_mass():
    pipe = make_pipe((10.0, 0.0, 1.0))
    for m in range(30):
        ltd_pipe_step(pipe, 0.1, (2.0 if m % 2 else 0.0, 0.5), k_p=0.0, k_r=0.0,
                      dt=1.0, tau=0.0, max_segments=5)
    assert pipe.total_volume() == pytest.approx(10.0, rel=1e-12)


def test_run_zero_scenario_stays_zero():
    net, sched, sc = single_pipe_inputs(duration=100.0, c1=0.0, c2=0.0,
                                        scheme="ltd")
    res = ltd_run(net, sched, sc)
    for arr in res.series.values():
        assert np.all(arr == 0.0)
    assert res.scheme == "ltd"


def test_run_plug_flow_front_arrival():
    net, sched, sc = single_pipe_inputs(velocity=1.0, duration=200.0, scheme="ltd")
    res = ltd_run(net, sched, sc)
    out = res.sensor_series["S_OUT"]
    # travel time 100 s: clean before, source concentration after
    assert out[99] == 0.0
    assert out[102] == pytest.approx(2.0, abs=1e-12)


def test_run_matches_analytic_decay():
    net, sched, sc = single_pipe_inputs(velocity=0.8, length=100.0,
                                        duration=500.0, kb_per_day=69.12,
                                        scheme="ltd")
    res = ltd_run(net, sched, sc)
    expected = 2.0 * math.exp(-(100.0 / 0.8) * 69.12 / 86400.0)
    assert res.sensor_series["S_OUT"][-1] == pytest.approx(expected, rel=1e-2)


def test_run_duration_beyond_horizon_rejected():
    net, sched, sc = single_pipe_inputs(duration=100.0, scheme="ltd")
    sc.duration = 1e6
    with pytest.raises(aq.HydraulicsError, match="exceeds"):
        ltd_run(net, sched, sc)


def test_run_unknown_sensor_element():
    net, sched, sc = single_pipe_inputs(duration=10.0, scheme="ltd")
    sc.sensors = [aq.SensorSpec("BAD", "NOPE", 1, None)]
    with pytest.raises(aq.ScenarioError, match="NOPE"):
        ltd_run(net, sched, sc)


def test_run_source_must_be_reservoir():
    net, sched, sc = single_pipe_inputs(duration=10.0, scheme="ltd")
    sc.sources = [("J1", 1, 1.0)]
    with pytest.raises(aq.ScenarioError, match="reservoir"):
        ltd_run(net, sched, sc)


def test_engine_dispatches_ltd(three_node):
    net, sched, sc = three_node
    sc.scheme = "ltd"
    res = aq.run_simulation(net, sched, sc)
    assert res.scheme == "ltd"
    assert ("TK1", 1) in res.series
