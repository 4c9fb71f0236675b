"""Forward model: quasi-linear 1D shallow water equations with linear friction.

    h_t + (h u)_x = 0
    u_t + (u^2 + g h)_x = -g b_x - kappa u

on ``[L, R]``, driven at ``x = L`` by a prescribed surface elevation and closed
by ``u(R) = 0``.  Time stepping is classical RK4 with the boundary rows reset
after every stage.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import ConfigurationError, DomainError, DryBoundaryError, NumericalFailure, UsageError
from .grid import Grid, SampledCurve, differentiate, spline_eval

__all__ = [
    "PhysParams",
    "Bathymetry",
    "State",
    "BoundaryForcing",
    "Trajectory",
    "CFLWarning",
    "swe_rhs",
    "apply_forward_bcs",
    "run_forward",
    "surface_elevation",
    "cfl_number",
]


class CFLWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class PhysParams:
    g: float = 9.81
    kappa: float = 0.2

    def __post_init__(self):
        if not (self.g > 0 and math.isfinite(self.g)):
            raise ConfigurationError(f"g must be positive, got {self.g}")
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise ConfigurationError(f"kappa must be non-negative, got {self.kappa}")


@dataclass(frozen=True, eq=False)
class Bathymetry:
    """Bottom elevation sampled at the nodes of ``grid``."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.grid.check_field(self.values, "bathymetry"), dtype=float)
        if v.ndim != 1 or not np.all(np.isfinite(v)):
            raise ConfigurationError("bathymetry must be a finite 1-D field")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: Grid) -> "Bathymetry":
        return cls(grid, np.zeros(grid.M))

    @classmethod
    def from_curve(cls, grid: Grid, curve: SampledCurve) -> "Bathymetry":
        """Spline a tabulated profile onto the grid nodes."""
        return cls(grid, spline_eval(curve, grid.nodes))

    @property
    def slope(self) -> np.ndarray:
        return differentiate(self.grid, self.values)


@dataclass(frozen=True)
class State:
    h: np.ndarray
    u: np.ndarray

    def check_positive(self):
        if not np.all(np.isfinite(self.h)) or not np.all(np.isfinite(self.u)):
            raise NumericalFailure("non-finite state")
        if np.min(self.h) <= 0.0:
            raise NumericalFailure(f"non-positive depth {np.min(self.h):.3e} m")


@dataclass(frozen=True, eq=False)
class BoundaryForcing:
    """Surface elevation time series imposed at the left boundary."""

    H_left: SampledCurve

    @classmethod
    def from_samples(cls, times, values) -> "BoundaryForcing":
        return cls(SampledCurve(times, values))

    @classmethod
    def constant(cls, level: float, T: float) -> "BoundaryForcing":
        return cls(SampledCurve([0.0, T], [level, level]))

    def check_covers(self, T: float):
        c = self.H_left
        if c.start > 0.0 or c.end < T * (1 - 1e-12):
            raise DomainError(f"forcing covers [{c.start}, {c.end}], need [0, {T}]")

    def __call__(self, t):
        return spline_eval(self.H_left, t)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Stored forward states; ``states[k] = (h, u)`` at ``times[k]``."""

    grid: Grid
    dt: float
    n_steps: int
    states: np.ndarray = field(repr=False)
    t_final: float
    stride: int = 1

    @property
    def h(self) -> np.ndarray:
        return self.states[:, 0, :]

    @property
    def u(self) -> np.ndarray:
        return self.states[:, 1, :]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.states.shape[0]) * (self.dt * self.stride)

    def state(self, k: int) -> State:
        return State(self.states[k, 0], self.states[k, 1])

    def __len__(self):
        return self.states.shape[0]


def _resolve_steps(dt, T):
    if not (dt > 0 and T > 0):
        raise ConfigurationError(f"need dt > 0 and T > 0, got dt={dt}, T={T}")
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ConfigurationError(f"T={T} is not an integer multiple of dt={dt}")
    return n


def cfl_number(g: Grid, state: State, p: PhysParams, dt: float) -> float:
    """``dt * max(|u| + sqrt(g h)) / min node spacing``."""
    speed = np.max(np.abs(state.u) + np.sqrt(p.g * np.maximum(state.h, 0.0)))
    return float(dt * speed / g.min_spacing)


def swe_rhs(s: State, b: Bathymetry, p: PhysParams, g: Grid, dealias: bool = True):
    """Tendencies ``(dh/dt, du/dt)`` of the shallow water system.

    The products ``h u`` and ``u^2`` are filtered before differentiation when
    ``dealias`` is set.  The pressure and bottom terms share one derivative,
    ``g (h + b)_x``, so a flat surface at rest is an exact steady state.
    """
    h = np.asarray(s.h, dtype=float)
    u = np.asarray(s.u, dtype=float)
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(u))):
        raise NumericalFailure("non-finite state in swe_rhs")
    prod = np.stack((h * u, u * u))
    if dealias:
        prod = prod @ g.filter_op.T
    flux = differentiate(g, prod)
    dh = -flux[0]
    du = -flux[1] - p.g * differentiate(g, h + b.values) - p.kappa * u
    return dh, du


def apply_forward_bcs(s: State, forcing: BoundaryForcing, b: Bathymetry, t: float) -> State:
    """Impose ``h(L) = H_left(t) - b(L)`` and ``u(R) = 0``."""
    h = np.array(s.h, dtype=float)
    u = np.array(s.u, dtype=float)
    h[0] = float(forcing(t)) - b.values[0]
    if not h[0] > 0.0:
        raise DryBoundaryError(f"boundary depth h(L)={h[0]:.3e} m at t={t}")
    u[-1] = 0.0
    return State(h, u)


def run_forward(
    b: Bathymetry,
    forcing: BoundaryForcing,
    p: PhysParams,
    g: Grid,
    dt: float = 1e-3,
    T: float = 1.0,
    *,
    dealias: bool = True,
    stride: int = 1,
    backend: str | None = None,
) -> Trajectory:
    """Integrate from a flat surface at rest up to time ``T``.

    The initial depth is ``H_left(0) - b`` everywhere with zero velocity.
    Only every ``stride``-th state is kept (``stride`` must divide the step
    count); adjoint replay needs ``stride=1``.
    """
    if b.grid is not g and not (b.grid.M == g.M and b.grid.same_domain(g)):
        raise UsageError("bathymetry lives on a different grid")
    n_steps = _resolve_steps(dt, T)
    stride = int(stride)
    if stride < 1 or n_steps % stride:
        raise ConfigurationError(f"stride {stride} does not divide {n_steps} steps")
    forcing.check_covers(T)

    times = np.arange(n_steps + 1) * dt
    hl = forcing(times)
    hl_mid = forcing(times[:-1] + 0.5 * dt)
    bvals = b.values
    if np.min(hl) - bvals[0] <= 0.0 or np.min(hl_mid) - bvals[0] <= 0.0:
        raise DryBoundaryError("prescribed boundary depth becomes non-positive")

    h0 = hl[0] - bvals
    u0 = np.zeros(g.M)
    init = State(h0, u0)
    init.check_positive()
    cfl = cfl_number(g, init, p, dt)
    if cfl > 1.0:
        warnings.warn(f"CFL number {cfl:.2f} > 1 at t=0", CFLWarning, stacklevel=2)

    D = np.ascontiguousarray(g.diff_op)
    DF = np.ascontiguousarray(D @ g.filter_op) if dealias else D
    fwd, _ = _backend.get_kernels(backend)
    states, fail = fwd(
        D, DF, np.ascontiguousarray(bvals), hl, hl_mid, h0, u0,
        float(p.g), float(p.kappa), float(dt), n_steps, stride,
    )
    if fail >= 0:
        raise NumericalFailure("forward solve lost positivity or went non-finite", step=fail)

    umax = np.max(np.abs(states[:, 1, :]))
    speed = umax + math.sqrt(p.g * np.max(states[:, 0, :]))
    cfl = dt * speed / g.min_spacing
    if cfl > 1.0:
        warnings.warn(f"CFL number reached {cfl:.2f} (> 1)", CFLWarning, stacklevel=2)
    states.flags.writeable = False
    return Trajectory(g, float(dt), n_steps, states, float(T), stride)


def surface_elevation(traj: Trajectory, b: Bathymetry) -> np.ndarray:
    """Free surface ``H = h + b`` for every stored step, shape ``(n_store, M)``."""
    if traj.grid.M != b.grid.M:
        raise UsageError("trajectory and bathymetry grids differ")
    return traj.h + b.values[None, :]
