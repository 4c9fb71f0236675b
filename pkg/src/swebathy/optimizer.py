"""Gradient descent on the bathymetry with an Armijo backtracking line search."""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .adjoint import run_adjoint
from .data_io import ObservationMode, ObservationSet
from .errors import ConfigurationError, NumericalFailure, UsageError
from .forward import Bathymetry, BoundaryForcing, PhysParams, Trajectory, run_forward
from .objective import (
    ObjectiveWeights,
    SensorLayout,
    assemble_l2_gradient,
    build_mismatch_source,
    eval_objective_full,
    eval_objective_sensors,
    h1_smooth,
    l2_norm,
)

log = logging.getLogger(__name__)

__all__ = [
    "OptimizerConfig",
    "Termination",
    "IterationRecord",
    "ReconstructionResult",
    "NoDescentStep",
    "InverseProblem",
    "armijo_search",
    "reconstruct",
]

GRAD_NORMS = ("h1_quadrature", "l2_nodal")


@dataclass(frozen=True)
class OptimizerConfig:
    """Stopping and line-search parameters.

    ``step_growth > 1`` starts each line search at the previously accepted
    step times ``step_growth`` instead of at ``a_init``.  ``grad_norm``
    selects the norm tested against ``epsilon``: the quadrature L2 norm of the
    smoothed gradient (default) or the nodal l2 norm of the raw gradient.
    """

    epsilon: float = 1e-3
    max_iters: int = 200
    armijo_c: float = 1e-4
    armijo_beta: float = 0.5
    a_init: float = 1.0
    a_min: float = 1e-12
    step_growth: float = 1.0
    grad_norm: str = "h1_quadrature"

    def __post_init__(self):
        if not 0 < self.armijo_c < 1:
            raise ConfigurationError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")
        if not 0 < self.armijo_beta < 1:
            raise ConfigurationError(f"armijo_beta must lie in (0, 1), got {self.armijo_beta}")
        if not (0 < self.a_min < self.a_init and math.isfinite(self.a_init)):
            raise ConfigurationError(f"need 0 < a_min < a_init, got {self.a_min}, {self.a_init}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ConfigurationError(f"max_iters must be a non-negative integer, got {self.max_iters}")
        if not (self.step_growth >= 1 and math.isfinite(self.step_growth)):
            raise ConfigurationError(f"step_growth must be >= 1, got {self.step_growth}")
        if self.grad_norm not in GRAD_NORMS:
            raise ConfigurationError(f"grad_norm must be one of {GRAD_NORMS}, got {self.grad_norm!r}")


class Termination(enum.Enum):
    GRADIENT_TOLERANCE = "GradientTolerance"
    NO_DESCENT_STEP = "NoDescentStep"
    MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class IterationRecord:
    """State at iterate ``iteration`` and the line search started from it.

    ``step`` is NaN and ``trials`` counts the rejected attempts when no
    search was made or none succeeded.
    """

    iteration: int
    J: float
    grad_norm: float
    step: float
    trials: int
    status: str = ""


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    b_final: Bathymetry
    history: tuple
    termination: Termination

    @property
    def J(self) -> np.ndarray:
        return np.array([r.J for r in self.history])


class NoDescentStep(Exception):
    """No trial step down to ``a_min`` gave sufficient decrease."""

    def __init__(self, trials):
        self.trials = trials
        super().__init__(f"no descent step after {trials} trials")


def armijo_search(b, v, J_current, J_eval, cfg: OptimizerConfig, *, norm_sq=None, a_start=None):
    """Backtrack from ``a_start`` (default ``a_init``) until sufficient decrease.

    ``J_eval(candidate)`` returns the objective, or a tuple whose first entry
    is the objective; ``candidate`` is ``b - a v`` (works for arrays, scalars
    and :class:`Bathymetry`).  ``norm_sq`` defaults to ``v . v``.  A trial that
    raises :class:`NumericalFailure` is a rejection.

    Returns ``(a, J_new, extra, trials)`` where ``extra`` is whatever else
    ``J_eval`` returned.  Raises :class:`NoDescentStep` once ``a < a_min``,
    or :class:`NumericalFailure` if every trial failed to solve.
    """
    if isinstance(b, Bathymetry):
        base, grid = b.values, b.grid
        vv = np.asarray(v, dtype=float)
        make = lambda a: Bathymetry(grid, base - a * vv)  # noqa: E731
    else:
        base = np.asarray(b, dtype=float)
        vv = np.asarray(v, dtype=float)
        make = lambda a: base - a * vv  # noqa: E731
    if norm_sq is None:
        norm_sq = float(np.sum(vv * vv))
    if not np.any(vv != 0) or not norm_sq > 0:
        raise UsageError("descent direction is zero")
    a = cfg.a_init if a_start is None else float(a_start)
    trials = failed = 0
    while a >= cfg.a_min:
        trials += 1
        try:
            out = J_eval(make(a))
        except NumericalFailure as exc:
            failed += 1
            log.debug("trial a=%g failed: %s", a, exc)
            a *= cfg.armijo_beta
            continue
        J_new, extra = (out[0], out[1:]) if isinstance(out, tuple) else (out, ())
        if J_new <= J_current - cfg.armijo_c * a * norm_sq:
            return a, float(J_new), extra, trials
        a *= cfg.armijo_beta
    if failed == trials:
        raise NumericalFailure(f"forward solve failed for all {trials} line-search trials")
    raise NoDescentStep(trials)


@dataclass(eq=False)
class InverseProblem:
    """Objective and adjoint gradient for one observation set.

    The observation must already be sampled at the solver time steps
    ``k dt`` (see :func:`swebathy.data_io.resample_observation`).
    """

    obs: ObservationSet
    forcing: BoundaryForcing
    params: PhysParams = field(default_factory=PhysParams)
    weights: ObjectiveWeights = field(default_factory=ObjectiveWeights)
    layout: SensorLayout | None = None
    backend: str | None = None

    def __post_init__(self):
        t = np.asarray(self.obs.times, dtype=float)
        if t.size < 2 or t[0] != 0.0:
            raise UsageError("observation must start at t = 0 with at least two samples")
        dt = t[1] - t[0]
        if np.max(np.abs(np.diff(t) - dt)) > 1e-9 * dt:
            raise UsageError("observation times are not uniformly spaced; resample first")
        self.dt = float(dt)
        self.n_steps = t.size - 1
        self.T = float(self.n_steps * self.dt)
        if self.obs.mode is ObservationMode.FULL_FIELD:
            self._H = self.obs.full_field
            self.grid = self.obs.grid
        else:
            if self.layout is None:
                self.layout = self.obs.layout
            self._Y = self.obs.sensor_array(t)
            self.grid = None

    def _check_grid(self, b: Bathymetry):
        if self.grid is not None and (b.grid.M != self.grid.M or not b.grid.same_domain(self.grid)):
            raise UsageError("bathymetry grid differs from the observation grid")

    def forward(self, b: Bathymetry) -> Trajectory:
        self._check_grid(b)
        return run_forward(b, self.forcing, self.params, b.grid, self.dt, self.T, backend=self.backend)

    def objective(self, b: Bathymetry, traj: Trajectory | None = None) -> float:
        traj = self.forward(b) if traj is None else traj
        if self.obs.mode is ObservationMode.FULL_FIELD:
            return eval_objective_full(traj, b, self._H, self.weights)
        return eval_objective_sensors(traj, b, self._Y, self.layout, self.weights)

    def evaluate(self, b: Bathymetry):
        """``(J, trajectory)``; suitable as a line-search closure."""
        traj = self.forward(b)
        return self.objective(b, traj), traj

    def gradient(self, b: Bathymetry, traj: Trajectory | None = None):
        """``(v_tilde, v)``: the L2 gradient and its H1-smoothed counterpart."""
        traj = self.forward(b) if traj is None else traj
        if self.obs.mode is ObservationMode.FULL_FIELD:
            src, pT = build_mismatch_source(traj, b, self.weights, self._H)
        else:
            src, pT = build_mismatch_source(traj, b, self.weights, sensor_obs=self._Y, layout=self.layout)
        adj = run_adjoint(traj, src, pT, self.params, backend=self.backend)
        vt = assemble_l2_gradient(traj, adj, b, pT, self.weights)
        return vt, h1_smooth(vt, b.grid)


def reconstruct(
    obs: ObservationSet,
    initial_b: Bathymetry,
    forcing: BoundaryForcing,
    params: PhysParams | None = None,
    weights: ObjectiveWeights | None = None,
    layout: SensorLayout | None = None,
    cfg: OptimizerConfig | None = None,
    *,
    backend: str | None = None,
) -> ReconstructionResult:
    """Descend from ``initial_b`` along the H1 gradient until a stopping rule fires."""
    cfg = cfg or OptimizerConfig()
    prob = InverseProblem(
        obs, forcing, params or PhysParams(), weights or ObjectiveWeights(), layout, backend
    )
    g = initial_b.grid
    b = initial_b
    try:
        J, traj = prob.evaluate(b)
    except NumericalFailure as exc:
        raise NumericalFailure(f"forward solve failed at the initial guess: {exc}", step=exc.step) from None
    history = []
    a_prev = None
    it = 0
    while True:
        vt, v = prob.gradient(b, traj)
        norm_sq = l2_norm(g, v) ** 2
        gnorm = math.sqrt(norm_sq) if cfg.grad_norm == "h1_quadrature" else float(np.linalg.norm(vt))
        if gnorm < cfg.epsilon:
            history.append(IterationRecord(it, J, gnorm, math.nan, 0, Termination.GRADIENT_TOLERANCE.value))
            term = Termination.GRADIENT_TOLERANCE
            break
        if it >= cfg.max_iters:
            history.append(IterationRecord(it, J, gnorm, math.nan, 0, Termination.MAX_ITERS.value))
            term = Termination.MAX_ITERS
            break
        start = cfg.a_init if a_prev is None else a_prev * cfg.step_growth
        if cfg.step_growth == 1.0:
            start = cfg.a_init
        try:
            a, J_new, extra, trials = armijo_search(b, v, J, prob.evaluate, cfg, norm_sq=norm_sq, a_start=start)
        except NoDescentStep as exc:
            history.append(IterationRecord(it, J, gnorm, math.nan, exc.trials, Termination.NO_DESCENT_STEP.value))
            term = Termination.NO_DESCENT_STEP
            break
        history.append(IterationRecord(it, J, gnorm, a, trials))
        log.info("iter %d  J=%.6e  |v|=%.3e  a=%.3g  trials=%d", it, J, gnorm, a, trials)
        b = Bathymetry(g, b.values - a * v)
        J, traj = J_new, extra[0]
        a_prev = a
        it += 1
    log.info("stopped after %d iterations: %s", it, term.value)
    return ReconstructionResult(b, tuple(history), term)
