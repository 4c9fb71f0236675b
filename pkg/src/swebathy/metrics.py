"""Error measures between bathymetries and between time series.

All bathymetry errors are nodal and reported in percent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError

__all__ = ["ErrorReport", "bathymetry_errors", "series_rel_l2"]

CSV_HEADER = ("rel_l2_pct", "rel_linf_pct", "nrmse_pct")


@dataclass(frozen=True)
class ErrorReport:
    rel_l2_pct: float
    rel_linf_pct: float
    nrmse_pct: float

    def as_row(self):
        return (self.rel_l2_pct, self.rel_linf_pct, self.nrmse_pct)


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise UsageError(f"length mismatch: {a.shape} vs {b.shape}")
    return a, b


def bathymetry_errors(b, b_ex) -> ErrorReport:
    """Relative l2, relative l-inf and range-normalised RMSE of ``b`` against ``b_ex``.

    Identical inputs give zeros even for a zero or constant reference; any
    other input against such a reference raises :class:`DomainError`.
    """
    b, b_ex = _pair(b, b_ex)
    d = b - b_ex
    if not np.any(d):
        return ErrorReport(0.0, 0.0, 0.0)
    n2 = float(np.linalg.norm(b_ex))
    ninf = float(np.max(np.abs(b_ex)))
    rng = float(b_ex.max() - b_ex.min())
    if n2 == 0.0:
        raise DomainError("relative error undefined for a zero reference")
    if rng == 0.0:
        raise DomainError("NRMSE undefined for a constant reference")
    return ErrorReport(
        rel_l2_pct=100.0 * float(np.linalg.norm(d)) / n2,
        rel_linf_pct=100.0 * float(np.max(np.abs(d))) / ninf,
        nrmse_pct=100.0 * math.sqrt(float(np.mean(d * d))) / rng,
    )


def series_rel_l2(sim, meas) -> float:
    """``|sim - meas| / |meas|`` over samples; series must share a time axis."""
    if hasattr(sim, "times") and hasattr(meas, "times"):
        if sim.times.shape != meas.times.shape or np.any(sim.times != meas.times):
            raise UsageError("series do not share a time axis")
        sim, meas = sim.values, meas.values
    s, m = _pair(sim, meas)
    nm = float(np.linalg.norm(m))
    if nm == 0.0:
        raise DomainError("relative error undefined for a zero measurement")
    return float(np.linalg.norm(s - m)) / nm
