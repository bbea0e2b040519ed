"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_accel.py [--repeat 5]

With KNOTMONO_NO_NUMBA=1 only the numpy column is filled in.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from knotmono import _accel


def _best(fn, repeat):
    fn()  # warm-up, includes jit compile on the first call
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _circle(m):
    s = np.linspace(0, 2 * np.pi, m, endpoint=False)
    curve = np.stack([np.cos(s), np.sin(s), 0 * s], axis=1)
    tangent = np.stack([-np.sin(s), np.cos(s), 0 * s], axis=1)
    return curve, tangent, np.full(m, 2 * np.pi / m)


def cases(rng):
    pts = rng.normal(size=(4000, 3)) * 2.0
    curve, tangent, w = _circle(512)
    steps = rng.normal(size=(4000, 64, 3)) * 0.05
    return {
        "biot_savart 4000x512": lambda nb: _accel.biot_savart(pts, curve, tangent, w, use_numba=nb),
        "path_product 4000x64": lambda nb: _accel.path_product(steps, use_numba=nb),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"backend: {_accel.backend()}")
    print(f"{'kernel':<24}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}{'max diff':>12}")
    for name, fn in cases(rng).items():
        t_np = _best(lambda: fn(False), args.repeat)
        if _accel.HAVE_NUMBA:
            t_nb = _best(lambda: fn(True), args.repeat)
            diff = np.max(np.abs(fn(True) - fn(False)))
            print(f"{name:<24}{t_np:>12.4f}{t_nb:>12.4f}{t_np / t_nb:>10.1f}{diff:>12.2e}")
        else:
            print(f"{name:<24}{t_np:>12.4f}{'-':>12}{'-':>10}{'-':>12}")


if __name__ == "__main__":
    main()
