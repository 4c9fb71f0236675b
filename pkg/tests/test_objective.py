import math

import numpy as np
import pytest

from conftest import hill, wave_forcing
from swebathy.adjoint import run_adjoint, trapezoid_weights
from swebathy.errors import ConfigurationError, UsageError
from swebathy.forward import Bathymetry, BoundaryForcing, PhysParams, Trajectory, run_forward, surface_elevation
from swebathy.grid import build_grid, integrate
from swebathy.objective import (
    ObjectiveWeights,
    SensorLayout,
    assemble_l2_gradient,
    build_mismatch_source,
    eval_objective_full,
    eval_objective_sensors,
    h1_smooth,
    l2_norm,
)

W0 = ObjectiveWeights(0.5, 0.5, 0.0, 0.0)


def _still(grid, level, n, dt=1e-3):
    states = np.zeros((n + 1, 2, grid.M))
    states[:, 0] = level
    return Trajectory(grid, dt, n, states, n * dt)


def test_weights_validation():
    with pytest.raises(ConfigurationError):
        ObjectiveWeights(gamma=-1.0)
    with pytest.raises(ConfigurationError):
        ObjectiveWeights(lambda1=float("nan"))


def test_layout_validation(grid68):
    with pytest.raises(ConfigurationError):
        SensorLayout([5.0, 3.0])
    with pytest.raises(ConfigurationError):
        SensorLayout([3.0], variance=0.0)
    with pytest.raises(ConfigurationError):
        SensorLayout([1.5]).check_inside(grid68)


def test_full_objective_examples(grid68):
    traj = _still(grid68, 0.3, 10)
    b = Bathymetry.zeros(grid68)
    H = surface_elevation(traj, b)
    assert eval_objective_full(traj, b, H, ObjectiveWeights()) == 0.0
    c = 0.02
    bc = Bathymetry(grid68, np.full(68, c))
    w = ObjectiveWeights(lambda1=1e-6)
    J = eval_objective_full(traj, bc, surface_elevation(traj, bc), w)
    assert J == pytest.approx(0.5 * 1e-6 * c**2 * 13.5, rel=1e-12)


def test_full_objective_manufactured():
    g = build_grid(40, 0.0, np.pi)
    traj = _still(g, 0.3, 1000)
    b = Bathymetry.zeros(g)
    eps = 1e-2
    H_obs = surface_elevation(traj, b) - eps * np.sin(g.nodes)
    J = eval_objective_full(traj, b, H_obs, ObjectiveWeights(1.0, 0.0, 0.0, 0.0))
    assert J == pytest.approx(eps**2 * np.pi / 4, abs=1e-8)


def test_full_objective_shape_mismatch(grid68):
    traj = _still(grid68, 0.3, 10)
    with pytest.raises(UsageError):
        eval_objective_full(traj, Bathymetry.zeros(grid68), np.zeros((5, 68)), W0)


def _constant_mismatch_J(grid, positions, m=2e-3, n=1000):
    traj = _still(grid, 0.3, n)
    lay = SensorLayout(positions)
    Y = np.full((n + 1, len(positions)), 0.3 - m)
    return eval_objective_sensors(traj, Bathymetry.zeros(grid), Y, lay, ObjectiveWeights(1.0, 0.0, 0.0, 0.0)), lay


def test_sensor_objective_equals_quadrature_formula(grid68):
    m, T = 2e-3, 1.0
    J1, lay = _constant_mismatch_J(grid68, [6.0], m)
    G = lay.gaussians(grid68)[0]
    assert J1 == pytest.approx(0.5 * T * m**2 * integrate(grid68, G**2), rel=1e-12)


def test_sensor_objective_gaussian_integral():
    # the squared Gaussian has std 0.15 m, below the mid-domain spacing at M=68,
    # so compare with the analytic integral on a grid that resolves it
    g = build_grid(200, 1.5, 15.0)
    m, T = 2e-3, 1.0
    J1, _ = _constant_mismatch_J(g, [6.0], m)
    assert J1 == pytest.approx(0.5 * T * m**2 * math.sqrt(math.pi * 0.045), rel=1e-6)
    J2, _ = _constant_mismatch_J(g, [4.0, 11.0], m)
    assert J2 == pytest.approx(2 * J1, rel=1e-6)
    J0, _ = _constant_mismatch_J(g, [6.0], 0.0)
    assert J0 == 0.0


def test_sensor_objective_accepts_series(grid68):
    from swebathy.data_io import TimeSeries

    traj = _still(grid68, 0.3, 100)
    b = Bathymetry.zeros(grid68)
    lay = SensorLayout([5.0, 9.0])
    t = np.linspace(0, 0.1, 11)
    series = [TimeSeries(t, np.full(11, 0.299)), TimeSeries(t, np.full(11, 0.301))]
    J_series = eval_objective_sensors(traj, b, series, lay, W0)
    J_array = eval_objective_sensors(traj, b, np.tile([0.299, 0.301], (101, 1)), lay, W0)
    assert J_series == pytest.approx(J_array, rel=1e-13)
    with pytest.raises(UsageError):
        eval_objective_sensors(traj, b, np.zeros((101, 3)), lay, W0)


def test_exact_data_gives_zero_source(grid68):
    traj = _still(grid68, 0.3, 10)
    b = Bathymetry.zeros(grid68)
    src, pT = build_mismatch_source(traj, b, ObjectiveWeights(), surface_elevation(traj, b))
    assert not np.any(src.values) and not np.any(pT)
    lay = SensorLayout([5.0])
    src, pT = build_mismatch_source(traj, b, ObjectiveWeights(), sensor_obs=np.full((11, 1), 0.3), layout=lay)
    # zero up to the roundoff of evaluating a constant at the sensor
    np.testing.assert_allclose(src.values, 0.0, atol=1e-15)
    np.testing.assert_allclose(pT, 0.0, atol=1e-15)


def test_terminal_field_full(grid68):
    traj = _still(grid68, 0.3, 10)
    b = Bathymetry.zeros(grid68)
    c = 1e-3
    _, pT = build_mismatch_source(traj, b, ObjectiveWeights(delta=0.5), surface_elevation(traj, b) - c)
    np.testing.assert_allclose(pT, 0.5 * c, rtol=1e-12)


def test_source_argument_checks(grid68):
    traj = _still(grid68, 0.3, 10)
    b = Bathymetry.zeros(grid68)
    with pytest.raises(UsageError):
        build_mismatch_source(traj, b, W0)
    with pytest.raises(UsageError):
        build_mismatch_source(traj, b, W0, sensor_obs=np.zeros((11, 1)))


def test_sensor_source_is_functional_derivative(grid68):
    # dJ/dH[k, n] = tw[k] * (q[n] * src[k, n]) for the data term, q = quadrature weights
    n = 20
    traj = _still(grid68, 0.3, n)
    b = Bathymetry.zeros(grid68)
    lay = SensorLayout([6.3])
    rng = np.random.default_rng(7)
    Y = 0.3 + 1e-3 * rng.standard_normal((n + 1, 1))
    w = ObjectiveWeights(1.0, 0.0, 0.0, 0.0)
    src, _ = build_mismatch_source(traj, b, w, sensor_obs=Y, layout=lay)
    tw = trapezoid_weights(n, traj.dt)
    k = 7
    eps = 1e-6
    for node in (20, 23, 26, 40):
        st = traj.states.copy()
        st[k, 0, node] += eps
        Jp = eval_objective_sensors(Trajectory(grid68, traj.dt, n, st, traj.t_final), b, Y, lay, w)
        st[k, 0, node] -= 2 * eps
        Jm = eval_objective_sensors(Trajectory(grid68, traj.dt, n, st, traj.t_final), b, Y, lay, w)
        fd = (Jp - Jm) / (2 * eps)
        an = tw[k] * grid68.quad_weights[node] * src.values[k, node]
        assert fd == pytest.approx(an, rel=1e-6, abs=1e-18)


def test_single_sensor_source_profile(grid68):
    traj = _still(grid68, 0.3, 4)
    lay = SensorLayout([7.0])
    w = ObjectiveWeights(gamma=0.5)
    src, _ = build_mismatch_source(traj, Bathymetry.zeros(grid68), w, sensor_obs=np.full((5, 1), 0.299), layout=lay)
    prof = src.values[0]
    # a fixed bump centred at the sensor, identical at every step
    assert np.all(src.values == prof)
    interior = slice(5, -5)
    peak = np.argmax(prof[interior]) + 5
    assert abs(grid68.nodes[peak] - 7.0) < 0.35
    # scaled by gamma: doubling gamma doubles the profile
    src2, _ = build_mismatch_source(
        traj, Bathymetry.zeros(grid68), ObjectiveWeights(gamma=1.0), sensor_obs=np.full((5, 1), 0.299), layout=lay
    )
    np.testing.assert_allclose(src2.values, 2 * src.values, rtol=1e-14)


# -- gradient -------------------------------------------------------------------


def test_gradient_exact_data_zero_b(grid68, params):
    b = Bathymetry.zeros(grid68)
    traj = run_forward(b, wave_forcing(0.5), params, grid68, 1e-3, 0.5)
    H = surface_elevation(traj, b)
    src, pT = build_mismatch_source(traj, b, ObjectiveWeights(), H)
    adj = run_adjoint(traj, src, pT, params)
    assert not np.any(assemble_l2_gradient(traj, adj, b, pT, ObjectiveWeights()))


def test_gradient_regulariser_only(grid68, params):
    c = 0.02
    b = Bathymetry(grid68, np.full(68, c))
    traj = run_forward(b, BoundaryForcing.constant(0.35, 0.3), params, grid68, 1e-3, 0.3)
    w = ObjectiveWeights(lambda1=1e-6)
    src, pT = build_mismatch_source(traj, b, w, surface_elevation(traj, b))
    adj = run_adjoint(traj, src, pT, params)
    np.testing.assert_allclose(assemble_l2_gradient(traj, adj, b, pT, w), 1e-6 * c, rtol=1e-9, atol=1e-15)


def _fd_check(grid, H_obs=None, Y=None, layout=None, T=1.0, seed=11, eps=1e-6):
    p = PhysParams()
    f = wave_forcing(T, amp=0.02, period=1.0)
    w = ObjectiveWeights()
    b = Bathymetry(grid, 0.3 * hill(grid.nodes))

    def J(bb):
        tr = run_forward(bb, f, p, grid, 1e-3, T)
        if H_obs is not None:
            return eval_objective_full(tr, bb, H_obs, w)
        return eval_objective_sensors(tr, bb, Y, layout, w)

    traj = run_forward(b, f, p, grid, 1e-3, T)
    if H_obs is not None:
        src, pT = build_mismatch_source(traj, b, w, H_obs)
    else:
        src, pT = build_mismatch_source(traj, b, w, sensor_obs=Y, layout=layout)
    vt = assemble_l2_gradient(traj, run_adjoint(traj, src, pT, p), b, pT, w)
    rng = np.random.default_rng(seed)
    xi = (grid.nodes - grid.L) / grid.length
    errs = []
    for _ in range(3):
        s = sum(c * np.sin((k + 1) * np.pi * xi) for k, c in enumerate(rng.standard_normal(5)))
        fd = (J(Bathymetry(grid, b.values + eps * s)) - J(Bathymetry(grid, b.values - eps * s))) / (2 * eps)
        errs.append(abs(integrate(grid, vt * s) - fd) / abs(fd))
    return errs


def _truth(grid, T=1.0):
    p = PhysParams()
    bt = Bathymetry(grid, hill(grid.nodes))
    return run_forward(bt, wave_forcing(T, amp=0.02, period=1.0), p, grid, 1e-3, T), bt


def test_gradient_matches_finite_differences_full(grid68):
    traj, bt = _truth(grid68)
    errs = _fd_check(grid68, H_obs=surface_elevation(traj, bt))
    assert max(errs) <= 0.05, errs


def test_gradient_matches_finite_differences_sensors():
    # resolved Gaussians: the continuous adjoint agrees closely with the discrete objective
    g = build_grid(100, 1.5, 15.0)
    traj, bt = _truth(g)
    lay = SensorLayout([3.0, 5.5, 8.5])
    from swebathy.grid import evaluate_at

    Y = evaluate_at(g, surface_elevation(traj, bt), lay.positions)
    errs = _fd_check(g, Y=Y, layout=lay)
    assert max(errs) <= 0.05, errs


# -- H1 smoothing -----------------------------------------------------------------


@pytest.mark.parametrize("k", [1, 2, 5])
def test_h1_eigenfunctions(grid68, k):
    x = grid68.nodes
    vt = np.sin(k * np.pi * (x - grid68.L) / grid68.length)
    v = h1_smooth(vt, grid68)
    np.testing.assert_allclose(v, vt / (1 + (k * np.pi / grid68.length) ** 2), atol=1e-8)


def test_h1_zero_and_symmetry(grid68):
    assert not np.any(h1_smooth(np.zeros(68), grid68))
    mid = 0.5 * (grid68.L + grid68.R)
    vt = np.exp(-((grid68.nodes - mid) ** 2)) + 0.1
    v = h1_smooth(vt, grid68)
    np.testing.assert_allclose(v, v[::-1], atol=1e-10)
    assert v[0] == 0.0 and v[-1] == 0.0


def test_h1_solves_helmholtz(grid68):
    from swebathy.grid import differentiate

    rng = np.random.default_rng(2)
    vt = rng.standard_normal(68)
    v = h1_smooth(vt, grid68)
    res = v - differentiate(grid68, differentiate(grid68, v)) - vt
    np.testing.assert_allclose(res[1:-1], 0.0, atol=1e-8 * np.abs(vt).max())


def test_l2_norm(grid68):
    assert l2_norm(grid68, np.ones(68)) == pytest.approx(math.sqrt(13.5))
