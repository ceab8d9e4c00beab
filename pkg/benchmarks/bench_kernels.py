"""Time the RK4 and leapfrog kernels under numba and under plain numpy.

    python benchmarks/bench_kernels.py [--steps N] [--nx N]

The first numba call includes JIT compilation and is reported separately.
The leapfrog case is a cubic Klein-Gordon doublet, u_tt = u_xx - u - u|u|^2.
"""
from __future__ import annotations

import argparse
import os
import time

import numpy as np
import sympy as sp

from lepage import _kernels


def _oscillator(use_numba):
    t, q, p = sp.symbols("t q p")
    return _kernels.compile_vector([t, q, p], [p, -q], use_numba=use_numba)


def _klein_gordon(use_numba):
    u1, u2 = sp.symbols("u1 u2")
    return _kernels.compile_force([u1, u2], [u1 + u1 * (u1**2 + u2**2), u2 + u2 * (u1**2 + u2**2)],
                                  use_numba=use_numba)


def _time(fn, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run(steps, nx):
    rows = []
    backends = ["numpy"] + (["numba"] if _kernels.numba is not None else [])
    x = np.linspace(0, 2 * np.pi, nx, endpoint=False)
    u0 = np.stack([np.cos(x), np.sin(x)])
    p0 = np.zeros_like(u0)
    dx = x[1] - x[0]
    for name in backends:
        os.environ["LEPAGE_DISABLE_NUMBA"] = "0" if name == "numba" else "1"
        nb = name == "numba"
        rhs = _oscillator(nb)
        t0 = time.perf_counter()
        _kernels.rk4(rhs, [1.0, 0.0], 0.0, 1e-3, steps)
        first = time.perf_counter() - t0
        rows.append(("rk4", name, first, _time(lambda: _kernels.rk4(rhs, [1.0, 0.0], 0.0, 1e-3, steps))))
        force = _klein_gordon(nb)
        lf = lambda: _kernels.leapfrog(force, u0, p0, 0.5 * dx, dx, 1.0, -1.0, steps // 10)
        t0 = time.perf_counter()
        lf()
        first = time.perf_counter() - t0
        rows.append(("leapfrog", name, first, _time(lf)))
    os.environ.pop("LEPAGE_DISABLE_NUMBA", None)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--nx", type=int, default=128)
    args = ap.parse_args()
    print(f"{'kernel':<10}{'backend':<8}{'first (s)':>12}{'best (s)':>12}")
    for kernel, name, first, best in run(args.steps, args.nx):
        print(f"{kernel:<10}{name:<8}{first:>12.4f}{best:>12.4f}")


if __name__ == "__main__":
    main()
