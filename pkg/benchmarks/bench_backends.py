"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_backends.py [--repeat 5]

Kernel timings swap the implementations in-process; the end-to-end rows run
each backend in a fresh interpreter via DEGDIFF_BACKEND.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from degdiff import kernels
from degdiff.grid import build_grid_2d
from degdiff.linsolve import assemble, sor_omega


def thomas_case(n, rng):
    lo, up = -rng.uniform(0, 50, n), -rng.uniform(0, 50, n)
    di = 1 + np.abs(lo) + np.abs(up)
    return lo, di, up, rng.normal(size=n)


def sor_case(nodes, rng):
    g = build_grid_2d(-1, 1, -1, 1, nodes - 1)
    z = (rng.uniform(size=g.shape) > 0.2) * g.interior.astype(float)
    rhs = rng.normal(size=g.shape) * g.interior
    return z, 10.0, rhs, sor_omega(assemble(z, 10.0, g))


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def end_to_end(backend, code):
    env = dict(os.environ, DEGDIFF_BACKEND=backend)
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


E2E = {
    "test 1, gamma 9.37 (1D)": "from degdiff.experiments import catalog; from degdiff import run, SchemeConfig\n"
    "p = catalog(1).problem(); run(p, SchemeConfig(gamma=9.37))\n"
    "import time; t = time.perf_counter(); run(p, SchemeConfig(gamma=9.37)); print(time.perf_counter() - t)",
    "test 8, gamma 10 (2D)": "from degdiff.experiments import catalog; from degdiff import run, SchemeConfig\n"
    "p = catalog(8).problem(nodes=21); run(p, SchemeConfig(gamma=10.0))\n"
    "p = catalog(8).problem()\n"
    "import time; t = time.perf_counter(); run(p, SchemeConfig(gamma=10.0)); print(time.perf_counter() - t)",
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-e2e", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    rows = []
    for n in (99, 10_000):
        case = thomas_case(n, rng)
        kernels.thomas_numba(*case)  # compile
        rows.append((f"thomas n={n}", best(lambda: kernels.thomas_numba(*case), args.repeat),
                     best(lambda: kernels.thomas_numpy(*case), args.repeat)))
    for nodes in (33, 101):
        z, g, rhs, omega = sor_case(nodes, rng)

        def solve(fn):
            x = rhs.copy()
            fn(z, g, rhs, x, omega, 1e-10, 100_000, 2)

        solve(kernels.sor_2d_numba)
        rows.append((f"red-black SOR {nodes}x{nodes}", best(lambda: solve(kernels.sor_2d_numba), args.repeat),
                     best(lambda: solve(kernels.sor_2d_numpy), args.repeat)))
    if not args.skip_e2e:
        for name, code in E2E.items():
            rows.append((f"run {name}", end_to_end("numba", code), end_to_end("numpy", code)))
    print(f"{'case':<34}{'numba [s]':>12}{'numpy [s]':>12}{'speedup':>9}")
    for name, a, b in rows:
        print(f"{name:<34}{a:>12.2e}{b:>12.2e}{b / a:>9.1f}")


if __name__ == "__main__":
    main()
