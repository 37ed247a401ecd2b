"""Time the numba-compiled kernels against their numpy fallbacks.

Usage::

    python benchmarks/bench_kernels.py [--repeat 20] [--json out.json]

Both variants are called directly, so the result does not depend on
HEDONIC_ESG_DISABLE_JIT. Without numba the "loop" column times plain Python.
"""
import argparse
import json
import timeit

import numpy as np

from hedonic_esg import kernels
from hedonic_esg._compat import HAS_NUMBA


def cases(rng):
    r = 0.05 + 0.02 * rng.standard_normal(500)
    phi = np.array([0.4, -0.1])
    a = rng.standard_normal((40, 40))
    sym = a @ a.T
    x = np.sort(rng.uniform(0.0, 1.0, 400))
    knots = np.concatenate([[0.0] * 3, np.unique(x), [1.0] * 3])
    shocks = rng.standard_normal((2000, 25))
    return {
        "ar_arch_nll (n=500, q=2)": (
            kernels.ar_arch_nll_loop, kernels.ar_arch_nll_numpy,
            (r, 0.05, phi, 2e-4, 0.3, 6.0)),
        "jacobi_eigh (40x40)": (
            kernels.jacobi_eigh_loop, kernels.jacobi_eigh_numpy, (sym, 1e-12, 100)),
        "bspline_basis (n=400, cubic)": (
            kernels.bspline_basis_loop, kernels.bspline_basis_numpy, (x, knots, 3)),
        "df_tau_stats (2000 x 25)": (
            kernels.df_tau_stats_loop, kernels.df_tau_stats_numpy, (shocks, -1)),
    }


def bench(repeat):
    rng = np.random.default_rng(0)
    rows = []
    for name, (loop, vec, args) in cases(rng).items():
        loop(*args)  # compile outside the timing
        vec(*args)
        t_loop = min(timeit.repeat(lambda: loop(*args), number=1, repeat=repeat))
        t_vec = min(timeit.repeat(lambda: vec(*args), number=1, repeat=repeat))
        rows.append({"kernel": name, "loop_s": t_loop, "numpy_s": t_vec,
                     "speedup": t_vec / t_loop if t_loop > 0 else float("inf")})
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    parser.add_argument("--json", default=None, help="also write results here")
    args = parser.parse_args()
    rows = bench(args.repeat)
    label = "numba" if HAS_NUMBA else "python"
    print(f"{'kernel':32s} {label + ' (ms)':>12s} {'numpy (ms)':>12s} {'ratio':>8s}")
    for r in rows:
        print(f"{r['kernel']:32s} {1e3 * r['loop_s']:12.3f} {1e3 * r['numpy_s']:12.3f} "
              f"{r['speedup']:8.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump({"numba": HAS_NUMBA, "results": rows}, fh, indent=2)


if __name__ == "__main__":
    main()
