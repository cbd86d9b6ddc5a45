import math

import numpy as np
import pytest

from aquanet.analysis import (
    RD_FLOOR,
    Diagnostics,
    SimulationResult,
    analytic_plug_flow_decay,
    export_timeseries,
    import_timeseries,
    pipe_average_series,
    relative_difference,
    render_plots,
)


def make_result(scheme="lw", **kwargs):
    defaults = dict(
        scheme=scheme,
        times=np.array([0.0, 1.0]),
        series={("J1", 1): np.array([0.0, 2.0]), ("J1", 2): np.array([0.0, 0.3])},
        element_order=["J1"],
    )
    defaults.update(kwargs)
    return SimulationResult(**defaults)


def test_element_series_lookup():
    res = make_result()
    np.testing.assert_array_equal(res.element_series("J1", 1), [0.0, 2.0])
    with pytest.raises(KeyError, match="J1.*species 3|species 3"):
        res.element_series("J1", 3)


def test_pipe_average_from_segments():
    res = make_result(
        pipe_segments={("P1", 1): np.array([[1.0, 3.0], [2.0, 0.0]])},
    )
    np.testing.assert_allclose(pipe_average_series(res, "P1"), [2.0, 1.0])


def test_pipe_average_precomputed_series():
    res = make_result(series={("P1", 1): np.array([0.5, 0.5])})
    np.testing.assert_allclose(pipe_average_series(res, "P1"), [0.5, 0.5])
    with pytest.raises(KeyError, match="NOPE"):
        pipe_average_series(res, "NOPE")


def test_relative_difference_definition():
    ref = np.array([2.0, 4.0])
    model = np.array([1.8, 5.0])
    rd = relative_difference(ref, model)
    np.testing.assert_allclose(rd, [0.1, -0.25])
    # RD(a, b) = 1 - b/a wherever a is above the floor
    np.testing.assert_allclose(rd, 1.0 - model / ref)


def test_relative_difference_floor_gives_nan():
    rd = relative_difference(np.array([0.0, RD_FLOOR / 2, 1.0]),
                             np.array([1.0, 1.0, 1.0]))
    assert np.isnan(rd[0]) and np.isnan(rd[1])
    assert rd[2] == 0.0


def test_relative_difference_shape_mismatch():
    with pytest.raises(ValueError, match="time axis"):
        relative_difference(np.zeros(3), np.zeros(4))


def test_analytic_plug_flow_decay():
    assert analytic_plug_flow_decay(2.0, 1e-3, 100.0, 1.0, t=50.0) == 0.0
    val = analytic_plug_flow_decay(2.0, 1e-3, 100.0, 1.0, t=200.0)
    assert val == pytest.approx(2.0 * math.exp(-0.1))
    with pytest.raises(ValueError, match="positive"):
        analytic_plug_flow_decay(2.0, 0.0, 100.0, 0.0, t=1.0)


def test_export_import_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(3)
    series = {
        ("J1", 1): rng.random(5) * math.pi,
        ("J1", 2): rng.random(5) * 1e-7,
        ("P1", 1): rng.random(5),
    }
    res = make_result(times=np.arange(5.0) * (1.0 / 3.0), series=series,
                      element_order=["J1", "P1"])
    path = tmp_path / "out.csv"
    export_timeseries(res, path)
    times, back = import_timeseries(path)
    np.testing.assert_array_equal(times, res.times)
    assert set(back) == set(series)
    for key in series:
        assert np.array_equal(back[key], series[key])  # bit-exact


def test_import_rejects_foreign_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,id,conc\n0,J1,1.0\n")
    with pytest.raises(ValueError, match="header"):
        import_timeseries(path)


def test_render_plots_writes_one_file_per_element(tmp_path):
    res = make_result()
    other = make_result(scheme="ltd",
                        series={("J1", 1): np.array([0.0, 1.9])})
    written = render_plots({"lw": res, "ltd": other}, ["J1"], tmp_path)
    assert written == [str(tmp_path / "J1.png")]
    assert (tmp_path / "J1.png").stat().st_size > 0


def test_render_plots_unknown_element(tmp_path):
    with pytest.raises(KeyError, match="NOPE"):
        render_plots({"lw": make_result()}, ["NOPE"], tmp_path)
    with pytest.raises(ValueError, match="no results"):
        render_plots({}, ["J1"], tmp_path)


def test_diagnostics_defaults():
    d = Diagnostics()
    assert d.min_value == {1: 0.0, 2: 0.0}
    assert d.max_solve_residual == 0.0
    assert d.cfl_ok and not d.warnings
