"""Timing of the hot kernels: numba against the pure-numpy fallback.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat 5]``.  Each kernel is
run once per backend before timing so numba compilation is excluded, and
the two backends are checked to agree to 1e-10 relative.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from morrey import _accel, kernels

GRIDS = [(2, (129, 129)), (2, (257, 257)), (3, (33, 33, 33)), (3, (65, 65, 65))]


def _time(func, repeat):
    func()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        best = min(best, time.perf_counter() - t0)
    return best


def _flat(result) -> np.ndarray:
    if isinstance(result, tuple):
        return np.concatenate([np.ravel(np.asarray(r, dtype=float)) for r in result])
    return np.ravel(np.asarray(result, dtype=float))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--p", type=float, default=4.0)
    args = parser.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba unavailable (or MORREY_NUMBA=0): nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<22}{'shape':<16}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}")
    for n, shape in GRIDS:
        u = rng.normal(size=shape)
        d = rng.normal(size=shape)
        h = 1.0 / (shape[0] - 1)
        alpha = 1.0 - n / args.p
        jobs = {
            "energy_and_gradient": lambda: kernels.energy_and_gradient(u, h, args.p),
            "line_derivatives": lambda: kernels.line_derivatives(u, d, h, args.p, 0.1),
            "hessian_diagonal": lambda: kernels.hessian_diagonal(u, h, args.p),
        }
        if np.prod(shape) <= 40_000:
            jobs["holder_scan"] = lambda: kernels.holder_scan(u, h, alpha)
        for name, job in jobs.items():
            times, results = {}, {}
            for backend in ("numpy", "numba"):
                _accel.set_backend(backend)
                times[backend] = _time(job, args.repeat)
                results[backend] = job()
            _accel.set_backend("numba")
            a, b = _flat(results["numpy"]), _flat(results["numba"])
            assert np.allclose(a, b, rtol=1e-10, atol=1e-12), name
            print(f"{name:<22}{str(shape):<16}{times['numpy']:>12.4f}{times['numba']:>12.4f}"
                  f"{times['numpy'] / times['numba']:>10.1f}")


if __name__ == "__main__":
    main()
