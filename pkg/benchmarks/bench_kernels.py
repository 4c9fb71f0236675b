"""Time the compiled and NumPy RK4 kernels on the same problem.

    python benchmarks/bench_kernels.py --steps 5000 --M 68 --repeat 3
"""

import argparse
import time

import numpy as np

from swebathy import _backend
from swebathy.adjoint import run_adjoint, MismatchSource
from swebathy.forward import Bathymetry, BoundaryForcing, PhysParams, run_forward
from swebathy.grid import build_grid


def setup(M, steps, dt):
    g = build_grid(M, 1.5, 15.0)
    T = steps * dt
    t = np.linspace(0.0, T, 501)
    forcing = BoundaryForcing.from_samples(t, 0.3 + 0.01 * np.sin(2 * np.pi * t / 3.0))
    b = Bathymetry(g, 0.1 * np.exp(-0.5 * ((g.nodes - 4.0) / 0.25) ** 2))
    return g, b, forcing, T


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--M", type=int, default=68)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    g, b, forcing, T = setup(args.M, args.steps, args.dt)
    p = PhysParams()
    backends = ["python"] + (["compiled"] if _backend.HAVE_COMPILED else [])
    results = {}
    for name in backends:
        tf, traj = best_of(lambda: run_forward(b, forcing, p, g, args.dt, T, backend=name), args.repeat)
        rng = np.random.default_rng(0)
        src = MismatchSource(1e-3 * rng.standard_normal((len(traj), g.M)))
        ta, adj = best_of(lambda: run_adjoint(traj, src, np.zeros(g.M), p, backend=name), args.repeat)
        results[name] = (tf, ta, traj, adj)

    print(f"M={args.M} steps={args.steps} dt={args.dt} (best of {args.repeat})")
    print(f"{'backend':<10}{'forward [s]':>14}{'adjoint [s]':>14}")
    for name, (tf, ta, _, _) in results.items():
        print(f"{name:<10}{tf:>14.4f}{ta:>14.4f}")
    if "compiled" in results:
        fp, ap_, trp, adp = results["python"]
        fc, ac, trc, adc = results["compiled"]
        print(f"speed-up   forward x{fp / fc:.1f}, adjoint x{ap_ / ac:.1f}")
        dfw = np.max(np.abs(trp.states - trc.states))
        dad = np.max(np.abs(adp.states - adc.states)) / max(np.max(np.abs(adp.states)), 1e-300)
        print(f"max |forward difference| {dfw:.2e}, relative adjoint difference {dad:.2e}")
    else:
        print("compiled extension not available; only the NumPy fallback was timed")


if __name__ == "__main__":
    main()
