"""
Compare the numba and numpy kernel backends.

Run ``python benchmarks/bench_kernels.py``. Each kernel is called once to
trigger compilation, then timed as the best of ``--repeat`` runs.
"""

import argparse
import time

import numpy as np

from dephase_hom import kernels
from dephase_hom._accel import HAS_NUMBA


def _cases(rng):
    edges = np.linspace(-37.5, 37.5, 587)
    centers = np.arange(-37.5, 37.6, 0.5)
    n_mc = 200_000
    cov = rng.standard_normal((64, 48))
    return {
        "lorentzian_bin_matrix": (edges, centers, 1.6),
        "laplace_gauss_bin_matrix": (edges, centers, 1.0 / 0.85, 0.35 / 2.3548),
        "phase_cov_matrix": (np.repeat(np.arange(16.0), 8), np.tile(np.arange(1.0, 9.0), 16),
                             0.3, 1.02, 12.0),
        "pivoted_cholesky": (cov @ cov.T, 1e-10),
        "mc_cos_moments": (rng.exponential(1.0, n_mc), rng.exponential(1.0, n_mc),
                           rng.standard_normal(n_mc), 0.675),
        "cos_moments": (rng.standard_normal(n_mc),),
    }


def best_time(fn, args, repeat):
    fn(*args)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if not HAS_NUMBA:
        print("numba is not available; nothing to compare")
        return 0
    rng = np.random.default_rng(0)
    print(f"{'kernel':28s} {'numba ms':>10s} {'numpy ms':>10s} {'ratio':>7s}")
    for name, case in _cases(rng).items():
        t_nb = best_time(kernels.NUMBA_KERNELS[name], case, args.repeat)
        t_np = best_time(kernels.NUMPY_KERNELS[name], case, args.repeat)
        print(f"{name:28s} {1e3 * t_nb:10.3f} {1e3 * t_np:10.3f} {t_np / t_nb:7.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
