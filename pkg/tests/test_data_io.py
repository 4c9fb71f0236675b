import math
import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import hill
from swebathy.data_io import (
    RNG_ALGORITHM,
    ObservationMode,
    ObservationSet,
    RunEnsemble,
    TimeSeries,
    add_noise,
    ensemble_mean_ci,
    format_float,
    generate_twin,
    grid_from_nodes,
    load_bathymetry_curve,
    load_ensemble,
    load_full_field,
    load_sensor_series,
    resample_observation,
    two_sample_difference_ci,
    write_bathymetry,
    write_full_field,
    write_sensor_series,
)
from swebathy.errors import ConfigurationError, DomainError, ParseError, UsageError
from swebathy.forward import Bathymetry, BoundaryForcing, PhysParams, run_forward, surface_elevation
from swebathy.grid import build_grid, evaluate_at
from swebathy.objective import SensorLayout


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


# -- parsing -----------------------------------------------------------------------


def test_parse_two_lines(tmp_path):
    ts = load_sensor_series(_write(tmp_path / "s.csv", "time_s,elevation_m\n0.0,0.300\n0.001,0.301\n"))
    np.testing.assert_array_equal(ts.times, [0.0, 0.001])
    np.testing.assert_array_equal(ts.values, [0.3, 0.301])
    assert ts.label == "s"


def test_duplicate_timestamp_names_line(tmp_path):
    p = _write(tmp_path / "d.csv", "time_s,elevation_m\n0.0,0.3\n0.1,0.3\n0.1,0.31\n")
    with pytest.raises(ParseError) as exc:
        load_sensor_series(p)
    assert exc.value.line == 4
    assert "d.csv" in str(exc.value) and "4" in str(exc.value)


@pytest.mark.parametrize(
    "body, line",
    [
        ("0.0,abc\n", 2),
        ("0.0,0.3\n0.1,nan\n", 3),
        ("0.0,0.3,7\n", 2),
        ("0.0,inf\n", 2),
    ],
)
def test_parse_errors(tmp_path, body, line):
    p = _write(tmp_path / "bad.csv", "time_s,elevation_m\n" + body)
    with pytest.raises(ParseError) as exc:
        load_sensor_series(p)
    assert exc.value.line == line


def test_missing_file_and_header(tmp_path):
    with pytest.raises(ParseError):
        load_sensor_series(tmp_path / "nope.csv")
    with pytest.raises(ParseError):
        load_sensor_series(_write(tmp_path / "h.csv", "t,H\n0,1\n"))
    with pytest.raises(ParseError):
        load_sensor_series(_write(tmp_path / "e.csv", ""))


def test_column_order_is_by_header(tmp_path):
    ts = load_sensor_series(_write(tmp_path / "r.csv", "elevation_m,time_s\n0.5,0.0\n0.6,1.0\n"))
    np.testing.assert_array_equal(ts.values, [0.5, 0.6])


def test_no_rows_dropped(tmp_path):
    t = np.linspace(0, 1, 1234)
    write_sensor_series(tmp_path / "n.csv", TimeSeries(t, np.sin(t)))
    assert len(load_sensor_series(tmp_path / "n.csv")) == 1234


doubles = st.floats(allow_nan=False, allow_infinity=False, width=64)


@settings(max_examples=50, deadline=None)
@given(st.lists(doubles, min_size=1, max_size=30))
def test_round_trip_bit_exact(tmp_path_factory, vals):
    p = tmp_path_factory.mktemp("rt") / "s.csv"
    ts = TimeSeries(np.arange(len(vals)) * 0.1, vals)
    write_sensor_series(p, ts)
    back = load_sensor_series(p)
    assert np.array_equal(back.values, ts.values) and np.array_equal(back.times, ts.times)


@settings(max_examples=200, deadline=None)
@given(doubles)
def test_format_float_round_trips(x):
    assert float(format_float(x)) == x


def test_time_series_validation():
    with pytest.raises(UsageError):
        TimeSeries([0.0, 1.0], [1.0])
    with pytest.raises(UsageError):
        TimeSeries([0.0, 0.0], [1.0, 2.0])


def test_bathymetry_file_round_trip(tmp_path, grid68):
    b = hill(grid68.nodes)
    write_bathymetry(tmp_path / "b.csv", grid68.nodes, b)
    c = load_bathymetry_curve(tmp_path / "b.csv")
    assert np.array_equal(c.knots, grid68.nodes) and np.array_equal(c.values, b)


def test_full_field_round_trip(tmp_path, grid32):
    rng = np.random.default_rng(0)
    t = np.arange(5) * 0.01
    H = rng.standard_normal((5, 32))
    write_full_field(tmp_path / "f.csv", t, grid32.nodes, H)
    header = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert header == "t_s," + ",".join(f"x_{i}" for i in range(32))
    t2, x2, H2 = load_full_field(tmp_path / "f.csv")
    assert np.array_equal(t2, t) and np.array_equal(x2, grid32.nodes) and np.array_equal(H2, H)
    assert grid_from_nodes(x2).M == 32


def test_full_field_errors(tmp_path):
    with pytest.raises(ParseError):
        load_full_field(_write(tmp_path / "a.csv", "time,x_0\nnan,1\n"))
    with pytest.raises(ParseError) as exc:
        load_full_field(_write(tmp_path / "b.csv", "t_s,x_0,x_1\nnan,0,1\n0.0,1,2\n0.1,1\n"))
    assert exc.value.line == 4
    with pytest.raises(UsageError):
        grid_from_nodes([0.0, 0.3, 0.6, 1.0])


def test_manifest(tmp_path):
    t = np.linspace(0, 1, 11)
    (tmp_path / "runs").mkdir()
    for i in range(3):
        write_sensor_series(tmp_path / "runs" / f"r{i}.csv", TimeSeries(t, t + i))
    _write(tmp_path / "m.csv", "path\nruns/r0.csv\nruns/r1.csv\n" + str(tmp_path / "runs" / "r2.csv") + "\n")
    e = load_ensemble(tmp_path / "m.csv")
    assert e.n == 3
    np.testing.assert_array_equal(e.matrix()[:, 0], [0.0, 1.0, 2.0])
    with pytest.raises(ParseError):
        load_ensemble(_write(tmp_path / "bad.csv", "file\nx.csv\n"))


def test_ensemble_axis_checked():
    with pytest.raises(UsageError):
        RunEnsemble((TimeSeries([0, 1], [0, 0]), TimeSeries([0, 2], [0, 0])))
    with pytest.raises(ConfigurationError):
        RunEnsemble(())


# -- statistics ----------------------------------------------------------------


def _ens(X, t=None):
    X = np.atleast_2d(X)
    t = np.arange(X.shape[1], dtype=float) if t is None else t
    return RunEnsemble(tuple(TimeSeries(t, row) for row in X))


def test_identical_runs_zero_halfwidth():
    mean, half = ensemble_mean_ci(_ens(np.tile([0.1, 0.2, 0.3], (5, 1))), 1.729)
    np.testing.assert_allclose(mean.values, [0.1, 0.2, 0.3], atol=1e-15)
    assert np.all(half.values == 0)


def test_two_run_hand_example():
    mean, half = ensemble_mean_ci(_ens([[0.0], [2.0]]), 1.0)
    assert mean.values[0] == 1.0
    assert half.values[0] == pytest.approx(1.0, abs=1e-15)


def test_ci_needs_two_runs():
    with pytest.raises(ConfigurationError):
        ensemble_mean_ci(_ens([[1.0, 2.0]]), 1.729)


def _oracle_one_sample(col, t):
    return statistics.fmean(col), t * statistics.stdev(col) / math.sqrt(len(col))


def test_one_sample_oracle():
    rng = np.random.default_rng(7)
    X = 0.3 + 0.01 * rng.standard_normal((20, 50))
    mean, half = ensemble_mean_ci(_ens(X), 1.729)
    for j in range(50):
        m, h = _oracle_one_sample(list(X[:, j]), 1.729)
        assert abs(mean.values[j] - m) <= 1e-12 and abs(half.values[j] - h) <= 1e-12


def test_two_sample_oracle():
    rng = np.random.default_rng(8)
    A = 0.3 + 0.01 * rng.standard_normal((20, 40))
    B = 0.31 + 0.02 * rng.standard_normal((20, 40))
    diff, half = two_sample_difference_ci(_ens(A), _ens(B), 1.686)
    n = 20
    for j in range(40):
        a, b = list(A[:, j]), list(B[:, j])
        sp = math.sqrt(((n - 1) * statistics.variance(a) + (n - 1) * statistics.variance(b)) / (2 * n - 2))
        assert abs(diff.values[j] - (statistics.fmean(a) - statistics.fmean(b))) <= 1e-12
        assert abs(half.values[j] - 1.686 * sp * math.sqrt(2 / n)) <= 1e-12


def test_two_sample_trivial_cases():
    X = np.tile([0.1, 0.2], (4, 1))
    diff, half = two_sample_difference_ci(_ens(X), _ens(X), 1.686)
    assert np.all(diff.values == 0) and np.all(half.values == 0)
    diff, half = two_sample_difference_ci(_ens(X + 0.05), _ens(X), 1.686)
    np.testing.assert_allclose(diff.values, 0.05, atol=1e-15)
    assert np.all(half.values == 0)


def test_two_sample_mismatch():
    with pytest.raises(UsageError):
        two_sample_difference_ci(_ens(np.zeros((3, 2))), _ens(np.zeros((4, 2))), 1.686)
    with pytest.raises(UsageError):
        two_sample_difference_ci(_ens(np.zeros((3, 2))), _ens(np.zeros((3, 2)), t=np.array([0.0, 5.0])), 1.686)


@settings(max_examples=30, deadline=None)
@given(st.floats(-10, 10), st.integers(0, 2**31))
def test_statistics_commute_with_shift(c, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((6, 4))
    Y = rng.standard_normal((6, 4))
    m0, h0 = ensemble_mean_ci(_ens(X), 1.729)
    m1, h1 = ensemble_mean_ci(_ens(X + c), 1.729)
    np.testing.assert_allclose(m1.values, m0.values + c, atol=1e-12)
    np.testing.assert_allclose(h1.values, h0.values, atol=1e-12)
    d0, k0 = two_sample_difference_ci(_ens(X), _ens(Y), 1.686)
    d1, k1 = two_sample_difference_ci(_ens(X + c), _ens(Y + c), 1.686)
    np.testing.assert_allclose(d1.values, d0.values, atol=1e-12)
    np.testing.assert_allclose(k1.values, k0.values, atol=1e-12)


# -- noise -----------------------------------------------------------------------


def _sensor_obs(values_list, t):
    lay = SensorLayout(np.linspace(3.0, 9.0, len(values_list)))
    series = tuple(TimeSeries(t, v) for v in values_list)
    return ObservationSet(ObservationMode.SENSORS, times=t, sensor_series=series, layout=lay)


def test_zero_noise_is_identity():
    t = np.linspace(0, 1, 11)
    obs = _sensor_obs([np.sin(t)], t)
    for seed in (0, 1, 99):
        assert add_noise(obs, 0.0, seed) is obs


def test_noise_is_seeded():
    t = np.linspace(0, 1, 101)
    obs = _sensor_obs([0.01 * np.sin(6 * t), 0.005 * np.cos(6 * t)], t)
    a, b = add_noise(obs, 0.05, 3), add_noise(obs, 0.05, 3)
    c = add_noise(obs, 0.05, 4)
    for sa, sb, sc in zip(a.sensor_series, b.sensor_series, c.sensor_series):
        assert np.array_equal(sa.values, sb.values)
        assert not np.array_equal(sa.values, sc.values)
    assert a.meta["seed"] == 3 and a.meta["rng"] == RNG_ALGORITHM


def test_noise_level_statistics():
    n = 100_000
    t = np.arange(n, dtype=float)
    clean = 0.3 + 0.01 * np.sin(2 * np.pi * t / 97.0)
    clean[0], clean[1] = 0.29, 0.31  # pin the amplitude at exactly 0.01
    obs = _sensor_obs([clean], t)
    noisy = add_noise(obs, 0.05, 1234)
    assert noisy.meta["noise_std"] == pytest.approx(5e-4, rel=1e-12)
    resid = noisy.sensor_series[0].values - clean
    assert abs(resid.std() - 5e-4) <= 0.02 * 5e-4
    assert abs(resid.mean()) < 1e-5


def test_noise_full_field_amplitude(grid32):
    t = np.linspace(0, 1, 50)
    F = 0.3 + np.outer(np.sin(2 * np.pi * t), np.linspace(0, 0.02, 32))
    obs = ObservationSet(ObservationMode.FULL_FIELD, times=t, grid=grid32, full_field=F)
    noisy = add_noise(obs, 0.1, 0)
    half_range = 0.5 * (F.max(axis=0) - F.min(axis=0)).max()
    assert noisy.meta["noise_std"] == pytest.approx(0.1 * half_range, rel=1e-12)
    with pytest.raises(ConfigurationError):
        add_noise(obs, -0.1, 0)


# -- resampling -------------------------------------------------------------------


def test_resample_identity(grid32):
    t = np.arange(11) * 0.1
    F = np.outer(np.cos(t), np.sin(grid32.nodes))
    obs = ObservationSet(ObservationMode.FULL_FIELD, times=t, grid=grid32, full_field=F)
    out = resample_observation(obs, grid32, 0.1, 1.0)
    np.testing.assert_allclose(out.full_field, F, atol=1e-12)


def test_resample_constant():
    t = np.linspace(0, 2, 7)
    obs = _sensor_obs([np.full(7, 0.3)], t)
    out = resample_observation(obs, None, 1e-3, 2.0)
    assert out.times.size == 2001
    np.testing.assert_allclose(out.sensor_series[0].values, 0.3, atol=1e-15)


def test_resample_band_limited():
    t = np.linspace(0, 10, 1001)
    f = lambda s: 0.01 * np.sin(2 * np.pi * s / 3.0) + 0.004 * np.cos(2 * np.pi * s / 1.3)  # noqa: E731
    obs = _sensor_obs([f(t)], t)
    out = resample_observation(obs, None, 1e-3, 10.0)
    assert np.max(np.abs(out.sensor_series[0].values - f(out.times))) <= 1e-4


def test_resample_space_and_time():
    src, dst = build_grid(100, 1.5, 15.0), build_grid(68, 1.5, 15.0)
    t = np.linspace(0, 1, 201)
    f = lambda tt, x: 0.3 + 0.01 * np.sin(2 * np.pi * tt)[:, None] * np.cos(x)[None, :]  # noqa: E731
    obs = ObservationSet(ObservationMode.FULL_FIELD, times=t, grid=src, full_field=f(t, src.nodes))
    out = resample_observation(obs, dst, 1e-3, 1.0)
    assert out.grid is dst and out.full_field.shape == (1001, 68)
    assert np.max(np.abs(out.full_field - f(out.times, dst.nodes))) <= 1e-6


def test_resample_coverage_shortfall(grid32):
    t = np.linspace(0, 1, 11)
    with pytest.raises(DomainError):
        resample_observation(_sensor_obs([t], t), None, 1e-2, 2.0)
    obs = ObservationSet(ObservationMode.FULL_FIELD, times=t, grid=grid32, full_field=np.zeros((11, 32)))
    with pytest.raises(DomainError):
        resample_observation(obs, grid32, 1e-2, 2.0)
    with pytest.raises(ConfigurationError):
        resample_observation(obs, grid32, 0.3, 1.0)


def test_observation_set_mode_exclusive(grid32):
    t = np.linspace(0, 1, 3)
    with pytest.raises(UsageError):
        ObservationSet(ObservationMode.FULL_FIELD, times=t, grid=grid32)
    with pytest.raises(UsageError):
        ObservationSet(
            ObservationMode.FULL_FIELD,
            times=t,
            grid=grid32,
            full_field=np.zeros((3, 32)),
            layout=SensorLayout([3.0]),
        )
    with pytest.raises(UsageError):
        ObservationSet(ObservationMode.SENSORS, sensor_series=(TimeSeries(t, t),), layout=SensorLayout([3.0, 4.0]))


def test_select_sensors():
    t = np.linspace(0, 1, 5)
    obs = _sensor_obs([t, 2 * t, 3 * t], t)
    sub = obs.select_sensors([0, 2])
    np.testing.assert_array_equal(sub.layout.positions, [3.0, 9.0])
    np.testing.assert_array_equal(sub.sensor_series[1].values, 3 * t)


# -- twin ----------------------------------------------------------------------


def test_twin_still_water():
    fine, coarse = build_grid(40, 1.5, 15.0), build_grid(24, 1.5, 15.0)
    f = BoundaryForcing.constant(0.3, 0.2)
    obs = generate_twin(Bathymetry.zeros(fine), f, PhysParams(), 2.5e-4, coarse, 1e-3, 0.2)
    assert obs.full_field.shape == (201, 24)
    np.testing.assert_allclose(obs.full_field, 0.3, atol=1e-12)
    lay = SensorLayout([3.0, 5.5])
    obs = generate_twin(Bathymetry.zeros(fine), f, PhysParams(), 2.5e-4, coarse, 1e-3, 0.2, ObservationMode.SENSORS, lay)
    for s in obs.sensor_series:
        np.testing.assert_allclose(s.values, 0.3, atol=1e-12)
    assert obs.meta["fine_M"] == 40 and obs.meta["fine_dt"] == 2.5e-4


def test_twin_is_not_inverse_crime(grid68):
    from conftest import wave_forcing

    T = 2.0
    f = wave_forcing(T, amp=0.02, period=1.0)
    fine = build_grid(100, 1.5, 15.0)
    lay = SensorLayout([3.0, 5.5, 8.5])
    twin = generate_twin(
        Bathymetry(fine, hill(fine.nodes)), f, PhysParams(), 5e-5, grid68, 1e-3, T, ObservationMode.SENSORS, lay
    )
    bc = Bathymetry(grid68, hill(grid68.nodes))
    direct = evaluate_at(grid68, surface_elevation(run_forward(bc, f, PhysParams(), grid68, 1e-3, T), bc), lay.positions)
    Y = np.column_stack([s.values for s in twin.sensor_series])
    rel = np.linalg.norm(Y - direct) / np.linalg.norm(direct)
    assert 1e-6 < rel < 1e-2


def test_twin_preconditions(grid68):
    with pytest.raises(ConfigurationError):
        generate_twin(Bathymetry.zeros(grid68), BoundaryForcing.constant(0.3, 1), PhysParams(), 5e-5, grid68, 1e-3, 1.0)
    fine = build_grid(100, 1.5, 15.0)
    with pytest.raises(ConfigurationError):
        generate_twin(Bathymetry.zeros(fine), BoundaryForcing.constant(0.3, 1), PhysParams(), 1e-3, grid68, 1e-3, 1.0)
    with pytest.raises(UsageError):
        generate_twin(
            Bathymetry.zeros(fine), BoundaryForcing.constant(0.3, 1), PhysParams(), 5e-5, grid68, 1e-3, 0.01,
            ObservationMode.SENSORS,
        )
