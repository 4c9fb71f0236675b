"""Command line front end: ``swebathy {forward,twin,reconstruct,metrics}``.

Configuration files hold one ``key = value`` per line with ``#`` comments.
Relative paths resolve against the config file's directory; a ``pkgdata:``
prefix names a file shipped inside the package.  Exit status is 0 on
success, 1 for configuration or input errors and 2 for numerical failures.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .data_io import (
    ObservationMode,
    ObservationSet,
    TimeSeries,
    add_noise,
    format_float,
    generate_twin,
    grid_from_nodes,
    load_bathymetry_curve,
    load_full_field,
    load_sensor_series,
    resample_observation,
    write_bathymetry,
    write_full_field,
    write_sensor_series,
)
from .errors import ConfigurationError, NumericalFailure, SweBathyError
from .forward import Bathymetry, BoundaryForcing, PhysParams, run_forward, surface_elevation
from .grid import build_grid, evaluate_at, spline_eval
from .metrics import CSV_HEADER, bathymetry_errors
from .objective import ObjectiveWeights, SensorLayout
from .optimizer import OptimizerConfig, reconstruct

log = logging.getLogger("swebathy")


def _floats(s):
    return tuple(float(x) for x in s.split(",") if x.strip())


def _ints(s):
    return tuple(int(x) for x in s.split(",") if x.strip())


# key -> (parser, default)
SCHEMA = {
    "domain.L": (float, 1.5),
    "domain.R": (float, 15.0),
    "grid.M": (int, 68),
    "time.dt": (float, 1e-3),
    "time.T": (float, 10.0),
    "physics.g": (float, 9.81),
    "physics.kappa": (float, 0.2),
    "weights.gamma": (float, 0.5),
    "weights.delta": (float, 0.5),
    "weights.lambda1": (float, 1e-6),
    "weights.lambda2": (float, 1e-7),
    "sensors.ids": (_ints, (2, 3, 4)),
    "sensors.positions": (_floats, ()),
    "sensors.variance": (float, 0.045),
    "optimizer.epsilon": (float, 1e-3),
    "optimizer.max_iters": (int, 200),
    "optimizer.armijo_c": (float, 1e-4),
    "optimizer.armijo_beta": (float, 0.5),
    "optimizer.a_init": (float, 1.0),
    "optimizer.a_min": (float, 1e-12),
    "optimizer.step_growth": (float, 1.0),
    "optimizer.grad_norm": (str, "h1_quadrature"),
    "twin.mode": (str, "full"),
    "twin.fine_M": (int, 100),
    "twin.fine_dt": (float, 5e-5),
    "twin.noise_fraction": (float, 0.0),
    "twin.seed": (int, 0),
    "observation.mode": (str, "sensors"),
    "paths.forcing": (str, ""),
    "paths.reference": (str, ""),
    "paths.initial": (str, ""),
    "paths.observations": (str, ""),
    "paths.output": (str, "."),
    "output.field_stride": (int, 1),
}

PATH_KEYS = ("paths.forcing", "paths.reference", "paths.initial", "paths.observations", "paths.output")


@dataclass
class RunConfig:
    values: dict
    source: Path | None = None

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def from_text(cls, text: str, source=None, base_dir=None) -> "RunConfig":
        vals = {k: d for k, (_, d) in SCHEMA.items()}
        seen = set()
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{source or '<config>'}:{n}: expected 'key = value'")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in SCHEMA:
                raise ConfigurationError(f"{source or '<config>'}:{n}: unknown key {key!r}")
            if key in seen:
                raise ConfigurationError(f"{source or '<config>'}:{n}: duplicate key {key!r}")
            seen.add(key)
            try:
                vals[key] = SCHEMA[key][0](val)
            except ValueError:
                raise ConfigurationError(f"{source or '<config>'}:{n}: bad value for {key}: {val!r}") from None
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        for key in PATH_KEYS:
            vals[key] = _resolve(vals[key], base)
        cfg = cls(vals, source)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text, path, path.parent)

    def validate(self):
        """Construct every owning type once so invariants fail at load time."""
        self.grid()
        self.params()
        self.weights()
        self.optimizer()
        if self["twin.mode"] not in ("full", "sensors", "both"):
            raise ConfigurationError(f"twin.mode must be full, sensors or both, got {self['twin.mode']!r}")
        if self["observation.mode"] not in ("full", "sensors"):
            raise ConfigurationError(f"observation.mode must be full or sensors, got {self['observation.mode']!r}")
        if self["sensors.positions"]:
            self.layout()
        if self["output.field_stride"] < 1:
            raise ConfigurationError("output.field_stride must be >= 1")
        if self["twin.noise_fraction"] < 0:
            raise ConfigurationError("twin.noise_fraction must be >= 0")

    def grid(self):
        return build_grid(self["grid.M"], self["domain.L"], self["domain.R"])

    def params(self):
        return PhysParams(self["physics.g"], self["physics.kappa"])

    def weights(self):
        return ObjectiveWeights(
            self["weights.gamma"], self["weights.delta"], self["weights.lambda1"], self["weights.lambda2"]
        )

    def optimizer(self):
        return OptimizerConfig(
            epsilon=self["optimizer.epsilon"],
            max_iters=self["optimizer.max_iters"],
            armijo_c=self["optimizer.armijo_c"],
            armijo_beta=self["optimizer.armijo_beta"],
            a_init=self["optimizer.a_init"],
            a_min=self["optimizer.a_min"],
            step_growth=self["optimizer.step_growth"],
            grad_norm=self["optimizer.grad_norm"],
        )

    def layout(self, ids=None):
        pos, names = self["sensors.positions"], self["sensors.ids"]
        if not pos:
            raise ConfigurationError("no sensors.positions configured")
        if len(pos) != len(names):
            raise ConfigurationError(f"{len(names)} sensor ids but {len(pos)} positions")
        if ids is None:
            idx = list(range(len(names)))
        else:
            unknown = [i for i in ids if i not in names]
            if unknown:
                raise ConfigurationError(f"unknown sensor id(s) {unknown}; configured: {list(names)}")
            idx = sorted(names.index(i) for i in ids)
        layout = SensorLayout(np.array(pos)[idx], self["sensors.variance"])
        layout.check_inside(self.grid())
        return layout, [names[i] for i in idx]

    def path(self, key, what):
        p = self[key]
        if not p:
            raise ConfigurationError(f"{key} ({what}) is not configured")
        return p


def _resolve(value, base: Path):
    if not value:
        return value
    if value.startswith("pkgdata:"):
        return Path(str(resources.files("swebathy") / "data" / value[len("pkgdata:"):]))
    p = Path(value)
    return p if p.is_absolute() else base / p


def _require_file(p: Path, what):
    if not Path(p).is_file():
        raise ConfigurationError(f"{what} not found: {p}")
    return p


def _forcing(cfg):
    p = _require_file(cfg.path("paths.forcing", "forcing file"), "forcing file")
    ts = load_sensor_series(p)
    forcing = BoundaryForcing.from_samples(ts.times, ts.values)
    forcing.check_covers(cfg["time.T"])
    return forcing


def _reference(cfg, grid):
    p = _require_file(cfg.path("paths.reference", "reference bathymetry"), "reference bathymetry")
    return Bathymetry.from_curve(grid, load_bathymetry_curve(p))


def _outdir(cfg, override):
    out = Path(override) if override else Path(cfg["paths.output"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else format_float(v) if isinstance(v, float) else v for v in row])


# -- commands ---------------------------------------------------------------------


def cmd_forward(cfg: RunConfig, out: Path, sensor_ids=None):
    grid = cfg.grid()
    forcing = _forcing(cfg)
    b = _reference(cfg, grid) if cfg["paths.reference"] else Bathymetry.zeros(grid)
    traj = run_forward(b, forcing, cfg.params(), grid, cfg["time.dt"], cfg["time.T"])
    H = surface_elevation(traj, b)
    times = traj.times
    if cfg["sensors.positions"]:
        layout, ids = cfg.layout(sensor_ids)
        Hs = evaluate_at(grid, H, layout.positions)
        _write_rows(
            out / "surface_sensors.csv",
            ["time_s"] + [f"sensor_{i}" for i in ids],
            ([float(t)] + [float(v) for v in row] for t, row in zip(times, Hs)),
        )
    s = cfg["output.field_stride"]
    write_full_field(out / "surface_field.csv", times[::s], grid.nodes, H[::s])
    log.info("forward run written to %s", out)


def cmd_twin(cfg: RunConfig, out: Path, sensor_ids=None):
    grid = cfg.grid()
    fine = build_grid(cfg["twin.fine_M"], cfg["domain.L"], cfg["domain.R"])
    forcing = _forcing(cfg)
    b_ex = _reference(cfg, fine)
    mode = cfg["twin.mode"]
    seed, frac = cfg["twin.seed"], cfg["twin.noise_fraction"]
    meta = {}
    args = (b_ex, forcing, cfg.params(), cfg["twin.fine_dt"], grid, cfg["time.dt"], cfg["time.T"])
    if mode in ("full", "both"):
        obs = add_noise(generate_twin(*args, ObservationMode.FULL_FIELD), frac, seed)
        write_full_field(out / "observation_full.csv", obs.times, grid.nodes, obs.full_field)
        meta.update(obs.meta)
    if mode in ("sensors", "both"):
        layout, ids = cfg.layout(sensor_ids)
        obs = add_noise(generate_twin(*args, ObservationMode.SENSORS, layout), frac, seed)
        for i, s in zip(ids, obs.sensor_series):
            write_sensor_series(out / f"observation_sensor_{i}.csv", s)
        meta.update(obs.meta)
    meta.update(
        mode=mode,
        seed=seed,
        noise_fraction=frac,
        rng=meta.get("rng", "numpy.random.PCG64"),
    )
    meta.setdefault("noise_std", 0.0)
    _write_rows(out / "twin_meta.csv", ["key", "value"], ([k, _meta_str(meta[k])] for k in sorted(meta)))
    log.info("twin observation written to %s", out)


def _meta_str(v):
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def _load_observation(cfg, grid, sensor_ids):
    src = Path(cfg.path("paths.observations", "observation directory"))
    dt, T = cfg["time.dt"], cfg["time.T"]
    if cfg["observation.mode"] == "full":
        p = _require_file(src / "observation_full.csv", "full-field observation")
        times, nodes, H = load_full_field(p)
        og = grid_from_nodes(nodes)
        obs = ObservationSet(ObservationMode.FULL_FIELD, times=times, grid=og, full_field=H)
        return resample_observation(obs, grid, dt, T), None
    layout, ids = cfg.layout(sensor_ids)
    series = []
    for i in ids:
        p = _require_file(src / f"observation_sensor_{i}.csv", f"observation for sensor {i}")
        series.append(load_sensor_series(p, label=f"sensor_{i}"))
    obs = ObservationSet(ObservationMode.SENSORS, sensor_series=tuple(series), layout=layout)
    return resample_observation(obs, grid, dt, T), layout


def cmd_reconstruct(cfg: RunConfig, out: Path, sensor_ids=None):
    grid = cfg.grid()
    forcing = _forcing(cfg)
    obs, layout = _load_observation(cfg, grid, sensor_ids)
    if cfg["paths.initial"]:
        p = _require_file(cfg["paths.initial"], "initial bathymetry")
        b0 = Bathymetry.from_curve(grid, load_bathymetry_curve(p))
    else:
        b0 = Bathymetry.zeros(grid)
    res = reconstruct(obs, b0, forcing, cfg.params(), cfg.weights(), layout, cfg.optimizer())
    write_bathymetry(out / "bathymetry_final.csv", grid.nodes, res.b_final.values)
    _write_rows(
        out / "history.csv",
        ["iteration", "J", "grad_norm", "step", "trials", "status"],
        ([r.iteration, float(r.J), float(r.grad_norm), float(r.step), r.trials, r.status] for r in res.history),
    )
    if cfg["paths.reference"]:
        rep = bathymetry_errors(res.b_final.values, _reference(cfg, grid).values)
        _write_rows(out / "errors.csv", list(CSV_HEADER), [[float(v) for v in rep.as_row()]])
    log.info("reconstruction finished (%s) after %d iterations", res.termination.value, len(res.history) - 1)


def cmd_metrics(cfg: RunConfig, b_path, b_ex_path):
    grid = cfg.grid()
    b_path, b_ex_path = (_resolve(str(p), Path.cwd()) for p in (b_path, b_ex_path))
    b = spline_eval(load_bathymetry_curve(_require_file(b_path, "bathymetry")), grid.nodes)
    b_ex = spline_eval(load_bathymetry_curve(_require_file(b_ex_path, "reference")), grid.nodes)
    rep = bathymetry_errors(b, b_ex)
    return ",".join(format_float(v) for v in rep.as_row())


# -- entry point ------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="swebathy", description="Bathymetry reconstruction with shallow water adjoints.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, hlp in (
        ("forward", "simulate the surface for the configured bathymetry"),
        ("twin", "generate a synthetic observation from the reference bathymetry"),
        ("reconstruct", "recover the bathymetry from observations"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("--config", required=True)
        p.add_argument("--output", help="output directory (overrides paths.output)")
        p.add_argument("--sensors", help="comma separated sensor ids, e.g. 2,3")
    p = sub.add_parser("metrics", help="print rel_l2_pct,rel_linf_pct,nrmse_pct for B against B_EX")
    p.add_argument("b")
    p.add_argument("b_ex")
    p.add_argument("--config", help="grid the two profiles are splined onto (default M=68 on [1.5, 15])")
    return ap


def _parse_sensors(s):
    if s is None:
        return None
    try:
        ids = _ints(s)
    except ValueError:
        raise ConfigurationError(f"--sensors expects integers, got {s!r}") from None
    if not ids:
        raise ConfigurationError("--sensors is empty")
    return ids


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.command == "metrics":
            cfg = RunConfig.from_file(args.config) if args.config else RunConfig.from_text("")
            print(cmd_metrics(cfg, args.b, args.b_ex))
            return 0
        cfg = RunConfig.from_file(args.config)
        ids = _parse_sensors(args.sensors)
        if ids is not None:
            cfg.layout(ids)
        out = _outdir(cfg, args.output)
        {"forward": cmd_forward, "twin": cmd_twin, "reconstruct": cmd_reconstruct}[args.command](cfg, out, ids)
        return 0
    except NumericalFailure as exc:
        print(f"swebathy: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (SweBathyError, OSError) as exc:
        print(f"swebathy: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
