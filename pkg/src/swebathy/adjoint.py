"""Continuous adjoint of the shallow water model, integrated backward in time.

With ``tau = T - t`` the adjoint becomes an initial-value problem

    p1_tau = u p1_x + g p2_x + s
    p2_tau = h p1_x + 2 u p2_x - kappa p2

started from ``p1 = terminal_p1``, ``p2 = 0``, with ``p2(R) = 0`` and
``p1(L) = -2 u(L) / h(L) * p2(L)`` enforced after every RK4 stage.  ``s`` is
the data-misfit source supplied by :mod:`swebathy.objective`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import NumericalFailure, UsageError
from .forward import PhysParams, State, Trajectory
from .grid import Grid, differentiate

__all__ = [
    "AdjointState",
    "AdjointTrajectory",
    "MismatchSource",
    "adjoint_rhs",
    "run_adjoint",
    "boundary_multiplier_p3",
    "trapezoid_weights",
]

# smallest admissible boundary depth in p1(L) = -2 u / h p2
H_MIN = 1e-6


@dataclass(frozen=True)
class AdjointState:
    p1: np.ndarray
    p2: np.ndarray


@dataclass(frozen=True, eq=False)
class MismatchSource:
    """Source term of the ``p1`` equation, one field per stored forward step."""

    values: np.ndarray

    def __call__(self, node, step):
        return self.values[step, node]

    @classmethod
    def zeros(cls, traj: Trajectory) -> "MismatchSource":
        return cls(np.zeros((len(traj), traj.grid.M)))


@dataclass(frozen=True, eq=False)
class AdjointTrajectory:
    """Adjoint fields aligned with the forward steps (index 0 is ``t = 0``)."""

    grid: Grid
    dt: float
    n_steps: int
    states: np.ndarray = field(repr=False)
    accumulated_integral: np.ndarray = field(repr=False)

    @property
    def p1(self) -> np.ndarray:
        return self.states[:, 0, :]

    @property
    def p2(self) -> np.ndarray:
        return self.states[:, 1, :]

    @property
    def p5(self) -> np.ndarray:
        return self.states[0, 0, :]

    def state(self, k: int) -> AdjointState:
        return AdjointState(self.states[k, 0], self.states[k, 1])


def trapezoid_weights(n_steps: int, dt: float) -> np.ndarray:
    w = np.full(n_steps + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    return w


def adjoint_rhs(a: AdjointState, fwd: State, src, p: PhysParams, g: Grid, dealias: bool = True):
    """Tendencies ``(dp1/dtau, dp2/dtau)`` of the time-reversed adjoint."""
    p1 = np.asarray(a.p1, dtype=float)
    p2 = np.asarray(a.p2, dtype=float)
    if not (np.all(np.isfinite(p1)) and np.all(np.isfinite(p2))):
        raise NumericalFailure("non-finite adjoint state")
    d1 = differentiate(g, p1)
    d2 = differentiate(g, p2)
    prod = np.stack((fwd.u * d1, fwd.h * d1, fwd.u * d2))
    if dealias:
        prod = prod @ g.filter_op.T
    dp1 = prod[0] + p.g * d2 + np.asarray(src, dtype=float)
    dp2 = prod[1] + 2.0 * prod[2] - p.kappa * p2
    return dp1, dp2


def run_adjoint(
    fwd: Trajectory,
    src: MismatchSource,
    terminal_p1,
    p: PhysParams,
    *,
    dealias: bool = True,
    backend: str | None = None,
) -> AdjointTrajectory:
    """Solve the adjoint against a stored forward trajectory.

    ``accumulated_integral`` is the trapezoidal time integral of
    ``s + g p2_x`` over ``[0, T]``, the first term of the L2 gradient.
    """
    g = fwd.grid
    if fwd.stride != 1:
        raise UsageError("adjoint replay needs every forward step (stride=1)")
    S = np.asarray(src.values, dtype=float)
    if S.shape != (len(fwd), g.M):
        raise UsageError(f"source shape {S.shape} does not match trajectory {(len(fwd), g.M)}")
    pT = np.ascontiguousarray(g.check_field(terminal_p1, "terminal_p1"), dtype=float)

    h = np.ascontiguousarray(fwd.h)
    u = np.ascontiguousarray(fwd.u)
    if np.min(h[:, 0]) < H_MIN:
        raise NumericalFailure(f"boundary depth below {H_MIN} m in adjoint boundary condition")
    _, adj = _backend.get_kernels(backend)
    states, fail = adj(
        np.ascontiguousarray(g.diff_op), np.ascontiguousarray(g.filter_op), bool(dealias),
        h, u, np.ascontiguousarray(S), pT, float(p.g), float(p.kappa), float(fwd.dt), H_MIN,
    )
    if fail >= 0:
        raise NumericalFailure("adjoint solve went non-finite", step=fail)

    w = trapezoid_weights(fwd.n_steps, fwd.dt)
    integrand = S + p.g * differentiate(g, states[:, 1, :])
    acc = w @ integrand
    states.flags.writeable = False
    return AdjointTrajectory(g, fwd.dt, fwd.n_steps, states, acc)


def boundary_multiplier_p3(adj: AdjointTrajectory, fwd: Trajectory, p: PhysParams) -> np.ndarray:
    """Boundary multiplier ``p3 = (2 u(L)^2 / h(L) - g) p2(L)`` over time."""
    if adj.states.shape[0] != len(fwd):
        raise UsageError("adjoint and forward trajectories are not aligned")
    hL = fwd.h[:, 0]
    if np.min(hL) < H_MIN:
        raise NumericalFailure(f"boundary depth below {H_MIN} m")
    uL = fwd.u[:, 0]
    return (2.0 * uL**2 / hL - p.g) * adj.p2[:, 0]
