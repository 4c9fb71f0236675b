"""Misfit functionals, adjoint sources and the L2 / H1 gradients.

Two data terms are supported:

* full field, ``gamma/2 ∬ (H - H_obs)^2 + delta/2 ∫ (H(T) - H_obs(T))^2``;
* sensors, where each point misfit ``m_i(t) = H(x_i, t) - H_obs,i(t)`` is
  spread by a Gaussian ``G_i(x) = exp(-(x - x_i)^2 / (2 variance))`` and the
  squared sum ``(Σ m_i G_i)^2`` is integrated instead.

Both add ``lambda1/2 ∫ b^2 + lambda2/2 ∫ b_x^2``.  Space integrals use the
grid quadrature, time integrals the trapezoidal rule over stored steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .adjoint import AdjointTrajectory, MismatchSource, trapezoid_weights
from .errors import ConfigurationError, NumericalFailure, UsageError
from .forward import Bathymetry, Trajectory, surface_elevation
from .grid import Grid, SampledCurve, differentiate, integrate, interpolation_matrix, spline_eval

__all__ = [
    "ObjectiveWeights",
    "SensorLayout",
    "GradientFields",
    "sensor_matrix",
    "eval_objective_full",
    "eval_objective_sensors",
    "build_mismatch_source",
    "assemble_l2_gradient",
    "h1_smooth",
    "l2_norm",
]


@dataclass(frozen=True)
class ObjectiveWeights:
    gamma: float = 0.5
    delta: float = 0.5
    lambda1: float = 1e-6
    lambda2: float = 1e-7

    def __post_init__(self):
        for name in ("gamma", "delta", "lambda1", "lambda2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigurationError(f"{name} must be a finite non-negative weight, got {v}")


@dataclass(frozen=True, eq=False)
class SensorLayout:
    """Sensor positions and the variance of the Gaussian that spreads each misfit."""

    positions: np.ndarray
    variance: float = 0.045

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.positions, dtype=float))
        if x.ndim != 1 or x.size == 0:
            raise ConfigurationError("need at least one sensor position")
        if np.any(np.diff(x) <= 0):
            raise ConfigurationError("sensor positions must be sorted and distinct")
        if not self.variance > 0:
            raise ConfigurationError(f"sensor variance must be positive, got {self.variance}")
        x.flags.writeable = False
        object.__setattr__(self, "positions", x)

    def __len__(self):
        return self.positions.size

    def check_inside(self, g: Grid):
        x = self.positions
        if np.any(x <= g.L) or np.any(x >= g.R):
            raise ConfigurationError(f"sensor positions {x.tolist()} not inside ({g.L}, {g.R})")

    def gaussians(self, g: Grid) -> np.ndarray:
        """``G[i, n] = exp(-(x_n - x_i)^2 / (2 variance))``."""
        d = g.nodes[None, :] - self.positions[:, None]
        return np.exp(-0.5 * d**2 / self.variance)

    def subset(self, idx) -> "SensorLayout":
        return SensorLayout(self.positions[list(idx)], self.variance)


@dataclass(frozen=True, eq=False)
class GradientFields:
    v_l2: np.ndarray
    v_h1: np.ndarray


def l2_norm(g: Grid, v) -> float:
    """Quadrature-weighted L2 norm."""
    v = np.asarray(v, dtype=float)
    return math.sqrt(max(float(integrate(g, v * v)), 0.0))


def _regulariser(b: Bathymetry, w: ObjectiveWeights) -> float:
    g = b.grid
    bx = differentiate(g, b.values)
    return 0.5 * w.lambda1 * integrate(g, b.values**2) + 0.5 * w.lambda2 * integrate(g, bx**2)


def _full_misfit(traj, b, H_obs):
    H = surface_elevation(traj, b)
    H_obs = np.asarray(H_obs, dtype=float)
    if H_obs.shape != H.shape:
        raise UsageError(f"observation shape {H_obs.shape} != trajectory field shape {H.shape}")
    return H - H_obs


def sensor_matrix(obs, times) -> np.ndarray:
    """Sensor observations as an array ``(len(times), m_p)``.

    ``obs`` is either such an array already or a sequence of objects with
    ``times`` and ``values`` (e.g. :class:`swebathy.data_io.TimeSeries`),
    which are splined onto ``times``.
    """
    times = np.asarray(times, dtype=float)
    if isinstance(obs, np.ndarray):
        if obs.ndim != 2 or obs.shape[0] != times.size:
            raise UsageError(f"sensor array shape {obs.shape} does not match {times.size} steps")
        return np.asarray(obs, dtype=float)
    cols = [spline_eval(SampledCurve(s.times, s.values), times) for s in obs]
    return np.column_stack(cols)


def _sensor_misfit(traj, b, obs, layout):
    g = traj.grid
    layout.check_inside(g)
    Y = sensor_matrix(obs, traj.times)
    if Y.shape[1] != len(layout):
        raise UsageError(f"{Y.shape[1]} sensor series for {len(layout)} sensor positions")
    P = interpolation_matrix(g, layout.positions)
    H = surface_elevation(traj, b)
    return H @ P.T - Y, P


def _gram(g: Grid, layout: SensorLayout) -> np.ndarray:
    G = layout.gaussians(g)
    return (G * g.quad_weights) @ G.T


def eval_objective_full(traj: Trajectory, b: Bathymetry, H_obs, w: ObjectiveWeights) -> float:
    g = traj.grid
    e = _full_misfit(traj, b, H_obs)
    tw = trapezoid_weights(len(traj) - 1, traj.dt * traj.stride)
    data = 0.5 * w.gamma * float(tw @ integrate(g, e * e))
    term = 0.5 * w.delta * float(integrate(g, e[-1] ** 2))
    return data + term + _regulariser(b, w)


def eval_objective_sensors(
    traj: Trajectory, b: Bathymetry, obs, layout: SensorLayout, w: ObjectiveWeights
) -> float:
    g = traj.grid
    m, _ = _sensor_misfit(traj, b, obs, layout)
    K = _gram(g, layout)
    q = np.einsum("ki,ij,kj->k", m, K, m)
    tw = trapezoid_weights(len(traj) - 1, traj.dt * traj.stride)
    data = 0.5 * w.gamma * float(tw @ q)
    term = 0.5 * w.delta * float(q[-1])
    return data + term + _regulariser(b, w)


def build_mismatch_source(
    traj: Trajectory,
    b: Bathymetry,
    w: ObjectiveWeights,
    H_obs=None,
    *,
    sensor_obs=None,
    layout: SensorLayout | None = None,
):
    """Adjoint source and terminal ``p1`` for either data term.

    Sensor mode differentiates the quadrature form of the objective with
    respect to nodal surface values (through the barycentric evaluation at
    each sensor) and divides by the quadrature weights, giving the density
    that plays the role of ``gamma (H - H_obs)`` in the full-field case.
    """
    g = traj.grid
    if (H_obs is None) == (sensor_obs is None):
        raise UsageError("pass exactly one of H_obs or sensor_obs")
    if H_obs is not None:
        e = _full_misfit(traj, b, H_obs)
        return MismatchSource(w.gamma * e), w.delta * e[-1]
    if layout is None:
        raise UsageError("sensor mode needs a SensorLayout")
    m, P = _sensor_misfit(traj, b, sensor_obs, layout)
    K = _gram(g, layout)
    dens = (m @ K @ P) / g.quad_weights
    return MismatchSource(w.gamma * dens), w.delta * dens[-1]


def assemble_l2_gradient(
    fwd: Trajectory,
    adj: AdjointTrajectory,
    b: Bathymetry,
    terminal_p1,
    w: ObjectiveWeights,
) -> np.ndarray:
    """L2 gradient of the objective with respect to the bathymetry.

    ``∫ (s + g p2_x) dt + p1(T) + lambda1 b - lambda2 b_xx - p1(0)``, where
    ``s`` is the adjoint source, so the data terms enter with the full
    surface misfit ``h + b - H_obs``.
    """
    g = fwd.grid
    if adj.states.shape[0] != len(fwd) or adj.grid.M != g.M:
        raise UsageError("adjoint and forward trajectories are not aligned")
    bxx = differentiate(g, differentiate(g, b.values))
    v = (
        adj.accumulated_integral
        + np.asarray(terminal_p1, dtype=float)
        + w.lambda1 * b.values
        - w.lambda2 * bxx
        - adj.p5
    )
    return v


def h1_smooth(v_tilde, g: Grid) -> np.ndarray:
    """Solve ``v - v_xx = v_tilde`` with ``v(L) = v(R) = 0``."""
    rhs = np.array(g.check_field(v_tilde, "v_tilde"), dtype=float)
    A = _helmholtz(g)
    rhs[0] = rhs[-1] = 0.0
    try:
        v = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"singular H1 system: {exc}") from None
    v[0] = v[-1] = 0.0
    return v


@lru_cache(maxsize=8)
def _helmholtz(g: Grid) -> np.ndarray:
    D = g.diff_op
    A = np.eye(g.M) - D @ D
    A[0] = 0.0
    A[-1] = 0.0
    A[0, 0] = A[-1, -1] = 1.0
    return A
