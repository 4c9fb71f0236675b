"""Observation ingestion, run statistics, synthetic twins and resampling.

File formats (UTF-8 CSV, one header row):

* sensor series: ``time_s,elevation_m``
* ensemble manifest: a ``path`` column, one run file per row
* bathymetry: ``x_m,b_m``
* full-field observation: ``t_s,x_0,...,x_{M-1}``; the first data row holds
  the node coordinates (its time cell is ``nan``), later rows hold a time and
  the surface elevation at every node.
"""

from __future__ import annotations

import csv
import enum
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DomainError, ParseError, UsageError
from .forward import Bathymetry, BoundaryForcing, PhysParams, run_forward, surface_elevation
from .grid import Grid, SampledCurve, build_grid, evaluate_at, interpolate_to_grid, spline_eval
from .objective import SensorLayout

log = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.random.PCG64"

__all__ = [
    "TimeSeries",
    "ObservationMode",
    "ObservationSet",
    "RunEnsemble",
    "load_sensor_series",
    "write_sensor_series",
    "load_ensemble",
    "load_bathymetry_curve",
    "write_bathymetry",
    "load_full_field",
    "write_full_field",
    "ensemble_mean_ci",
    "two_sample_difference_ci",
    "generate_twin",
    "add_noise",
    "resample_observation",
    "format_float",
]


def format_float(x) -> str:
    """17 significant digits: round-trips any double."""
    return format(float(x), ".17g")


@dataclass(frozen=True, eq=False)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise UsageError(f"time series {self.label!r}: times and values differ in shape")
        if t.size and np.any(np.diff(t) <= 0):
            raise UsageError(f"time series {self.label!r}: times not strictly increasing")
        t.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size

    def curve(self) -> SampledCurve:
        return SampledCurve(self.times, self.values)


class ObservationMode(enum.Enum):
    FULL_FIELD = "FullField"
    SENSORS = "Sensors"


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Surface elevation data, either on a grid at every step or at sensors.

    Full-field data lives in ``full_field[k, n]`` at ``times[k]`` and
    ``grid.nodes[n]``; sensor data is one :class:`TimeSeries` per entry of
    ``layout``.  ``meta`` carries provenance such as the noise seed.
    """

    mode: ObservationMode
    times: np.ndarray | None = None
    grid: Grid | None = None
    full_field: np.ndarray | None = None
    sensor_series: tuple | None = None
    layout: SensorLayout | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode is ObservationMode.FULL_FIELD:
            if self.full_field is None or self.grid is None or self.times is None:
                raise UsageError("full-field observation needs times, grid and full_field")
            if self.sensor_series is not None or self.layout is not None:
                raise UsageError("full-field observation must not carry sensor data")
            F = np.asarray(self.full_field, dtype=float)
            if F.shape != (np.size(self.times), self.grid.M):
                raise UsageError(f"full field shape {F.shape} inconsistent with times/grid")
            object.__setattr__(self, "full_field", F)
            object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        else:
            if self.sensor_series is None or self.layout is None:
                raise UsageError("sensor observation needs sensor_series and layout")
            if self.full_field is not None:
                raise UsageError("sensor observation must not carry a full field")
            series = tuple(self.sensor_series)
            if len(series) != len(self.layout):
                raise UsageError(f"{len(series)} series for {len(self.layout)} sensors")
            object.__setattr__(self, "sensor_series", series)

    def sensor_array(self, times) -> np.ndarray:
        """Sensor values splined onto ``times``, shape ``(len(times), m_p)``."""
        cols = [spline_eval(s.curve(), times) for s in self.sensor_series]
        return np.column_stack(cols)

    def select_sensors(self, idx) -> "ObservationSet":
        idx = list(idx)
        return replace(
            self,
            sensor_series=tuple(self.sensor_series[i] for i in idx),
            layout=self.layout.subset(idx),
        )


@dataclass(frozen=True, eq=False)
class RunEnsemble:
    """Repeated runs of one experiment sampled on a shared time axis."""

    runs: tuple

    def __post_init__(self):
        runs = tuple(self.runs)
        if not runs:
            raise ConfigurationError("empty ensemble")
        t0 = runs[0].times
        for r in runs[1:]:
            if r.times.shape != t0.shape or np.any(r.times != t0):
                raise UsageError("ensemble runs do not share a time axis")
        object.__setattr__(self, "runs", runs)

    @property
    def n(self) -> int:
        return len(self.runs)

    @property
    def times(self) -> np.ndarray:
        return self.runs[0].times

    def matrix(self) -> np.ndarray:
        return np.stack([r.values for r in self.runs])


# -- file formats -----------------------------------------------------------


def _read_rows(path):
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", path) from None
        rows = [(reader.line_num, row) for row in reader if row and any(c.strip() for c in row)]
    return path, [h.strip() for h in header], rows


def _float(cell, path, line):
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"not a number: {cell!r}", path, line) from None


def load_sensor_series(path, time_col="time_s", value_col="elevation_m", label=None) -> TimeSeries:
    """Read one sensor record; times must be strictly increasing and values finite."""
    path, header, rows = _read_rows(path)
    try:
        it, iv = header.index(time_col), header.index(value_col)
    except ValueError:
        raise ParseError(f"header {header} lacks {time_col!r}/{value_col!r}", path, 1) from None
    t = np.empty(len(rows))
    v = np.empty(len(rows))
    for k, (line, row) in enumerate(rows):
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(row)}", path, line)
        t[k] = _float(row[it], path, line)
        v[k] = _float(row[iv], path, line)
        if not (math.isfinite(t[k]) and math.isfinite(v[k])):
            raise ParseError("non-finite value", path, line)
        if k and t[k] <= t[k - 1]:
            raise ParseError(f"time {t[k]} does not increase (previous {t[k - 1]})", path, line)
    log.info("loaded %d samples from %s", len(rows), path)
    return TimeSeries(t, v, label if label is not None else path.stem)


def write_sensor_series(path, ts: TimeSeries):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time_s", "elevation_m"])
        for t, v in zip(ts.times, ts.values):
            w.writerow([format_float(t), format_float(v)])


def load_ensemble(manifest) -> RunEnsemble:
    """Read a manifest CSV with a ``path`` column; relative paths are manifest-relative."""
    manifest, header, rows = _read_rows(manifest)
    if "path" not in header:
        raise ParseError(f"manifest header {header} lacks 'path'", manifest, 1)
    ip = header.index("path")
    runs = []
    for line, row in rows:
        p = Path(row[ip].strip())
        if not p.is_absolute():
            p = manifest.parent / p
        runs.append(load_sensor_series(p))
    log.info("ensemble %s: %d runs", manifest, len(runs))
    return RunEnsemble(tuple(runs))


def load_bathymetry_curve(path) -> SampledCurve:
    """Tabulated ``x_m,b_m`` profile as a spline."""
    ts = load_sensor_series(path, time_col="x_m", value_col="b_m")
    return SampledCurve(ts.times, ts.values)


def write_bathymetry(path, x, b):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x_m", "b_m"])
        for xi, bi in zip(x, b):
            w.writerow([format_float(xi), format_float(bi)])


def write_full_field(path, times, nodes, H):
    H = np.asarray(H)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t_s"] + [f"x_{i}" for i in range(len(nodes))])
        w.writerow(["nan"] + [format_float(x) for x in nodes])
        for t, row in zip(times, H):
            w.writerow([format_float(t)] + [format_float(v) for v in row])


def load_full_field(path):
    """Return ``(times, nodes, H)`` from a full-field CSV."""
    path, header, rows = _read_rows(path)
    if not header or header[0] != "t_s":
        raise ParseError("full-field header must start with 't_s'", path, 1)
    M = len(header) - 1
    if not rows:
        raise ParseError("missing node-coordinate row", path, 2)
    line, first = rows[0]
    if len(first) != M + 1:
        raise ParseError(f"expected {M + 1} columns", path, line)
    nodes = np.array([_float(c, path, line) for c in first[1:]])
    times = np.empty(len(rows) - 1)
    H = np.empty((len(rows) - 1, M))
    for k, (line, row) in enumerate(rows[1:]):
        if len(row) != M + 1:
            raise ParseError(f"expected {M + 1} columns, got {len(row)}", path, line)
        vals = [_float(c, path, line) for c in row]
        if not all(math.isfinite(v) for v in vals):
            raise ParseError("non-finite value", path, line)
        times[k] = vals[0]
        H[k] = vals[1:]
        if k and times[k] <= times[k - 1]:
            raise ParseError("times not strictly increasing", path, line)
    return times, nodes, H


# -- statistics ----------------------------------------------------------------


def ensemble_mean_ci(e: RunEnsemble, t_value: float):
    """Pointwise mean and one-sample t half-width ``t s / sqrt(n)``."""
    if e.n < 2:
        raise ConfigurationError("confidence interval needs at least two runs")
    X = e.matrix()
    mean = X.mean(axis=0)
    s = X.std(axis=0, ddof=1)
    half = t_value * s / math.sqrt(e.n)
    return TimeSeries(e.times, mean, "mean"), TimeSeries(e.times, half, "halfwidth")


def two_sample_difference_ci(a: RunEnsemble, b: RunEnsemble, t_value: float):
    """Difference of means with pooled half-width ``t s_p sqrt(2/n)``."""
    if a.n != b.n:
        raise UsageError(f"ensembles differ in size ({a.n} vs {b.n})")
    if a.times.shape != b.times.shape or np.any(a.times != b.times):
        raise UsageError("ensembles do not share a time axis")
    if a.n < 2:
        raise ConfigurationError("confidence interval needs at least two runs per ensemble")
    n = a.n
    A, B = a.matrix(), b.matrix()
    diff = A.mean(axis=0) - B.mean(axis=0)
    sp = np.sqrt(0.5 * (A.var(axis=0, ddof=1) + B.var(axis=0, ddof=1)))
    half = t_value * sp * math.sqrt(2.0 / n)
    return TimeSeries(a.times, diff, "difference"), TimeSeries(a.times, half, "halfwidth")


# -- synthetic observations -----------------------------------------------------


def _store_stride(n_fine, fine_dt, coarse_dt):
    stride = max(1, int(round(coarse_dt / fine_dt)) // 2)
    while n_fine % stride:
        stride -= 1
    return stride


def generate_twin(
    b_ex: Bathymetry,
    forcing: BoundaryForcing,
    params: PhysParams,
    fine_dt: float,
    coarse_grid: Grid,
    coarse_dt: float,
    T: float,
    mode: ObservationMode = ObservationMode.FULL_FIELD,
    layout: SensorLayout | None = None,
) -> ObservationSet:
    """Synthetic observation from a finer forward run than the inversion uses.

    ``b_ex`` lives on the fine grid.  The fine surface elevation is moved to
    the coarse grid by polynomial interpolation and to the coarse time steps
    by cubic splines; sensor values use the fine interpolant at each sensor.
    """
    fine = b_ex.grid
    if fine.M <= coarse_grid.M:
        raise ConfigurationError(f"fine grid (M={fine.M}) must be finer than coarse (M={coarse_grid.M})")
    if not fine_dt < coarse_dt:
        raise ConfigurationError(f"fine dt {fine_dt} must be below coarse dt {coarse_dt}")
    if not fine.same_domain(coarse_grid):
        raise UsageError("fine and coarse grids cover different domains")
    n_fine = int(round(T / fine_dt))
    stride = _store_stride(n_fine, fine_dt, coarse_dt)
    traj = run_forward(b_ex, forcing, params, fine, fine_dt, T, stride=stride)
    H = surface_elevation(traj, b_ex)
    knots = traj.times
    n_coarse = int(round(T / coarse_dt))
    times = np.arange(n_coarse + 1) * coarse_dt
    meta = {
        "fine_M": fine.M,
        "fine_dt": fine_dt,
        "coarse_M": coarse_grid.M,
        "coarse_dt": coarse_dt,
        "T": T,
        "mode": mode.value,
    }
    if mode is ObservationMode.FULL_FIELD:
        Hc = interpolate_to_grid(fine, H, coarse_grid)
        Ht = spline_eval(SampledCurve(knots, Hc), times)
        return ObservationSet(mode, times=times, grid=coarse_grid, full_field=Ht, meta=meta)
    if layout is None:
        raise UsageError("sensor twin needs a SensorLayout")
    layout.check_inside(fine)
    Hs = evaluate_at(fine, H, layout.positions)
    series = tuple(
        TimeSeries(times, spline_eval(SampledCurve(knots, Hs[:, i]), times), f"sensor_{i}")
        for i in range(len(layout))
    )
    return ObservationSet(mode, times=times, sensor_series=series, layout=layout, meta=meta)


def _wave_amplitude(obs: ObservationSet) -> float:
    if obs.mode is ObservationMode.FULL_FIELD:
        X = obs.full_field
        return float(np.max((X.max(axis=0) - X.min(axis=0)) / 2.0))
    return max(float((s.values.max() - s.values.min()) / 2.0) for s in obs.sensor_series)


def add_noise(obs: ObservationSet, fraction: float, seed: int) -> ObservationSet:
    """Add i.i.d. Gaussian noise with std ``fraction * A``.

    ``A`` is half the largest peak-to-trough range of the clean observation
    over all nodes or sensors.
    """
    if not fraction >= 0:
        raise ConfigurationError(f"noise fraction must be >= 0, got {fraction}")
    if fraction == 0:
        return obs
    sigma = fraction * _wave_amplitude(obs)
    rng = np.random.Generator(np.random.PCG64(seed))
    meta = dict(obs.meta, noise_fraction=fraction, noise_std=sigma, seed=seed, rng=RNG_ALGORITHM)
    if obs.mode is ObservationMode.FULL_FIELD:
        noisy = obs.full_field + rng.normal(0.0, sigma, size=obs.full_field.shape)
        return replace(obs, full_field=noisy, meta=meta)
    series = tuple(
        TimeSeries(s.times, s.values + rng.normal(0.0, sigma, size=len(s)), s.label)
        for s in obs.sensor_series
    )
    return replace(obs, sensor_series=series, meta=meta)


def resample_observation(obs: ObservationSet, grid: Grid, dt: float, T: float) -> ObservationSet:
    """Bring an observation onto ``grid`` (full field only) and steps ``k dt``, ``k <= T/dt``."""
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * T:
        raise ConfigurationError(f"T={T} is not an integer multiple of dt={dt}")
    times = np.arange(n + 1) * dt
    if obs.mode is ObservationMode.FULL_FIELD:
        if not obs.grid.same_domain(grid):
            raise UsageError("observation grid covers a different domain")
        if obs.times[0] > 0.0 or obs.times[-1] < T * (1 - 1e-12):
            raise DomainError(f"observation covers [{obs.times[0]}, {obs.times[-1]}], need [0, {T}]")
        X = obs.full_field
        if obs.grid.M != grid.M or np.any(obs.grid.nodes != grid.nodes):
            X = interpolate_to_grid(obs.grid, X, grid)
        if obs.times.shape == times.shape and np.allclose(obs.times, times, rtol=0, atol=1e-12 * T):
            Xt = X
        else:
            Xt = spline_eval(SampledCurve(obs.times, X), times)
        return replace(obs, times=times, grid=grid, full_field=Xt)
    series = []
    for s in obs.sensor_series:
        if s.times[0] > 0.0 or s.times[-1] < T * (1 - 1e-12):
            raise DomainError(f"sensor {s.label!r} covers [{s.times[0]}, {s.times[-1]}], need [0, {T}]")
        series.append(TimeSeries(times, spline_eval(s.curve(), times), s.label))
    return replace(obs, times=times, sensor_series=tuple(series))


def grid_from_nodes(nodes) -> Grid:
    """Rebuild the Chebyshev grid whose nodes were written to a file."""
    nodes = np.asarray(nodes, dtype=float)
    g = build_grid(nodes.size, nodes[0], nodes[-1])
    if np.max(np.abs(g.nodes - nodes)) > 1e-9 * g.length:
        raise UsageError("file nodes are not Chebyshev--Gauss--Lobatto points")
    return g
