"""Chebyshev collocation primitives: grid, differentiation, quadrature, interpolation.

All spatial operators live on Chebyshev--Gauss--Lobatto nodes mapped affinely
onto ``[L, R]``.  Nodes are stored in increasing order, so ``nodes[0] == L`` and
``nodes[-1] == R``.  Operators are dense; grids are small (``M <= ~200``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, DomainError, UsageError

__all__ = [
    "Grid",
    "SampledCurve",
    "build_grid",
    "differentiate",
    "integrate",
    "interpolation_matrix",
    "interpolate_to_grid",
    "evaluate_at",
    "spline_eval",
    "spectral_filter_matrix",
]


def _frozen(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def _cheb_nodes_ref(M):
    """Gauss--Lobatto points on [-1, 1] in increasing order."""
    N = M - 1
    j = np.arange(M)
    # sin form is exactly antisymmetric about the midpoint
    x = np.sin(np.pi * (2 * j - N) / (2 * N))
    x[0], x[-1] = -1.0, 1.0
    return x


def _bary_weights(M):
    w = (-1.0) ** np.arange(M)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _clenshaw_curtis(M):
    """Clenshaw--Curtis weights on [-1, 1] for the Gauss--Lobatto nodes."""
    N = M - 1
    theta = np.pi * np.arange(M) / N
    w = np.zeros(M)
    v = np.ones(N - 1)
    interior = theta[1:-1]
    if N % 2 == 0:
        w[0] = w[-1] = 1.0 / (N**2 - 1)
        for k in range(1, N // 2):
            v -= 2.0 * np.cos(2 * k * interior) / (4 * k**2 - 1)
        v -= np.cos(N * interior) / (N**2 - 1)
    else:
        w[0] = w[-1] = 1.0 / N**2
        for k in range(1, (N - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * interior) / (4 * k**2 - 1)
    w[1:-1] = 2.0 * v / N
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Collocation grid on ``[L, R]`` with its differentiation and quadrature operators."""

    M: int
    L: float
    R: float
    nodes: np.ndarray = field(repr=False)
    diff_op: np.ndarray = field(repr=False)
    quad_weights: np.ndarray = field(repr=False)
    bary_weights: np.ndarray = field(repr=False)

    @property
    def length(self) -> float:
        return self.R - self.L

    @cached_property
    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.nodes)))

    @cached_property
    def filter_op(self) -> np.ndarray:
        """Dealiasing filter (order 8, cutoff 2/3) as a nodal matrix."""
        return _frozen(spectral_filter_matrix(self))

    def same_domain(self, other: "Grid") -> bool:
        return self.L == other.L and self.R == other.R

    def check_field(self, f, name="field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape[-1:] != (self.M,):
            raise UsageError(f"{name} has trailing length {f.shape[-1:]}, grid has M={self.M}")
        return f


def build_grid(M: int, L: float, R: float) -> Grid:
    """Chebyshev--Gauss--Lobatto grid with ``M`` nodes on ``[L, R]``.

    >>> build_grid(4, -1.0, 1.0).nodes
    array([-1. , -0.5,  0.5,  1. ])
    """
    if int(M) != M or M < 4:
        raise ConfigurationError(f"grid needs M >= 4 nodes, got {M}")
    M = int(M)
    L, R = float(L), float(R)
    if not (np.isfinite(L) and np.isfinite(R)) or L >= R:
        raise ConfigurationError(f"grid needs L < R, got L={L}, R={R}")

    xi = _cheb_nodes_ref(M)
    scale = 0.5 * (R - L)
    nodes = L + scale * (xi + 1.0)
    nodes[0], nodes[-1] = L, R

    w = _bary_weights(M)
    dx = xi[:, None] - xi[None, :]
    np.fill_diagonal(dx, 1.0)
    D = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(D, 0.0)
    # negative-sum trick: rows annihilate constants to roundoff
    np.fill_diagonal(D, -D.sum(axis=1))
    D /= scale

    quad = _clenshaw_curtis(M) * scale
    return Grid(M, L, R, _frozen(nodes), _frozen(D), _frozen(quad), _frozen(w))


def differentiate(g: Grid, f) -> np.ndarray:
    """Collocation derivative ``diff_op @ f``; works on ``(..., M)`` stacks."""
    f = g.check_field(f)
    return f @ g.diff_op.T


def integrate(g: Grid, f):
    """Clenshaw--Curtis quadrature over the whole domain."""
    f = g.check_field(f)
    return f @ g.quad_weights


def interpolation_matrix(src: Grid, points) -> np.ndarray:
    """Matrix ``P`` with ``P @ f`` = barycentric interpolant of ``f`` at ``points``.

    Rows for points that coincide with a source node are unit vectors.
    """
    x = np.atleast_1d(np.asarray(points, dtype=float))
    if np.any(x < src.L) or np.any(x > src.R):
        raise DomainError(f"interpolation points outside [{src.L}, {src.R}]")
    w = src.bary_weights
    diff = x[:, None] - src.nodes[None, :]
    exact = diff == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        C = w[None, :] / diff
    hit = exact.any(axis=1)
    C[hit] = 0.0
    C[exact] = 1.0
    C /= C.sum(axis=1, keepdims=True)
    return C


def interpolate_to_grid(src: Grid, f, dst: Grid) -> np.ndarray:
    """Evaluate the polynomial interpolant of ``f`` (on ``src``) at ``dst`` nodes."""
    if not src.same_domain(dst):
        raise UsageError(f"domains differ: [{src.L}, {src.R}] vs [{dst.L}, {dst.R}]")
    f = src.check_field(f)
    return f @ interpolation_matrix(src, dst.nodes).T


def evaluate_at(src: Grid, f, points) -> np.ndarray:
    """Evaluate the interpolant of ``f`` at arbitrary points inside the domain."""
    f = src.check_field(f)
    return f @ interpolation_matrix(src, points).T


def spectral_filter_matrix(g: Grid, order: int = 8, cutoff: float = 2.0 / 3.0) -> np.ndarray:
    """Nodal matrix of an exponential filter acting on Chebyshev coefficients.

    Modes with ``k/N <= cutoff`` pass untouched; higher modes are damped by
    ``exp(-alpha * ((k/N - cutoff) / (1 - cutoff))**order)`` with ``alpha``
    chosen so the top mode is reduced to machine epsilon.
    """
    N = g.M - 1
    xi = np.clip(2.0 * (g.nodes - g.L) / g.length - 1.0, -1.0, 1.0)
    k = np.arange(g.M)
    V = np.cos(np.arccos(xi)[:, None] * k[None, :])
    eta = k / N
    alpha = -np.log(np.finfo(float).eps)
    sigma = np.ones(g.M)
    hi = eta > cutoff
    sigma[hi] = np.exp(-alpha * ((eta[hi] - cutoff) / (1.0 - cutoff)) ** order)
    # F = V diag(sigma) V^-1
    F = np.linalg.solve(V.T, (V * sigma).T).T
    return F


@dataclass(frozen=True, eq=False)
class SampledCurve:
    """Tabulated samples joined by a cubic spline; never extrapolates.

    ``boundary_rule`` is ``"not-a-knot"`` (default) or ``"natural"``.
    """

    knots: np.ndarray
    values: np.ndarray
    boundary_rule: str = "not-a-knot"

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if knots.ndim != 1 or knots.shape[0] != values.shape[0]:
            raise UsageError("knots and values must be 1-D and of equal length")
        if knots.size < 2:
            raise UsageError("a sampled curve needs at least two knots")
        if np.any(np.diff(knots) <= 0):
            raise UsageError("knots must be strictly increasing")
        if self.boundary_rule not in ("not-a-knot", "natural"):
            raise UsageError(f"unsupported boundary rule {self.boundary_rule!r}")
        object.__setattr__(self, "knots", _frozen(knots))
        object.__setattr__(self, "values", _frozen(values))

    @cached_property
    def _spline(self):
        return CubicSpline(
            self.knots, self.values, bc_type=self.boundary_rule, extrapolate=False
        )

    @property
    def start(self) -> float:
        return float(self.knots[0])

    @property
    def end(self) -> float:
        return float(self.knots[-1])

    def __call__(self, queries):
        return spline_eval(self, queries)


def spline_eval(c: SampledCurve, queries) -> np.ndarray:
    """Cubic spline values at ``queries`` (domain error outside the knots)."""
    q = np.asarray(queries, dtype=float)
    lo, hi = c.knots[0], c.knots[-1]
    # tolerate roundoff on the end knots, e.g. n*dt landing 1 ulp past T
    slack = 1e-12 * max(abs(lo), abs(hi), hi - lo)
    if np.any(q < lo - slack) or np.any(q > hi + slack):
        raise DomainError(f"query outside knot range [{lo}, {hi}]")
    shape = q.shape
    q = np.clip(q, lo, hi).ravel()
    out = np.array(c._spline(q))
    # exact reproduction at knots
    idx = np.clip(np.searchsorted(c.knots, q), 0, c.knots.size - 1)
    at_knot = c.knots[idx] == q
    out[at_knot] = c.values[idx[at_knot]]
    return out.reshape(shape + c.values.shape[1:])
