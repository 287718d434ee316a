"""Time the compiled kernels against their numpy fallbacks.

The three hot loops are the stencil apply inside every CG iteration, the
memory recurrence scan inside the kernel studies, and the tridiagonal solve
of the radial cell problem.  Both implementations ship regardless of which
one the MEMOSTRANGE_BACKEND flag selects, so they can always be compared.

    python3 benchmarks/bench_kernels.py
    python3 benchmarks/bench_kernels.py --repeats 20 --cells 64
"""

import argparse
import time

import numpy as np

from memostrange import kernels


def _best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _row(label, numba_fn, numpy_fn, repeats):
    t_nb = _best_of(numba_fn, repeats)
    t_np = _best_of(numpy_fn, repeats)
    speedup = t_np / t_nb if t_nb > 0 else float("inf")
    print(f"{label:<38} {t_nb * 1e3:>10.3f} {t_np * 1e3:>10.3f} {speedup:>9.2f}x")
    return speedup


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=10,
                        help="timing repeats per kernel, best is kept (default 10)")
    parser.add_argument("--cells", type=int, default=48,
                        help="cells per axis of the 3d stencil grid (default 48)")
    parser.add_argument("--scan-steps", type=int, default=2048,
                        help="time steps in the recurrence scan (default 2048)")
    parser.add_argument("--scan-width", type=int, default=4096,
                        help="independent columns in the scan (default 4096)")
    parser.add_argument("--tridiag", type=int, default=2000,
                        help="unknowns in the tridiagonal solve (default 2000)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    if not kernels.HAVE_NUMBA:
        print("numba is not importable; both columns run the numpy path")
    kernels.warm_up()  # pay the JIT cost outside the timings

    m = args.cells - 1
    u3 = rng.standard_normal((m, m, m))
    inv_h2 = np.full(3, float(args.cells) ** 2)
    out3 = np.empty_like(u3)

    drive = rng.standard_normal((args.scan_steps, args.scan_width))
    y0 = rng.standard_normal(args.scan_width)
    a, w1, w0 = 0.95, 0.03, 0.02

    k = args.tridiag
    lower = rng.uniform(0.5, 1.0, k - 1)
    upper = rng.uniform(0.5, 1.0, k - 1)
    diag = 4.0 + rng.uniform(0.0, 1.0, k)  # diagonally dominant
    rhs = rng.standard_normal(k)

    print(f"{'kernel':<38} {'numba ms':>10} {'numpy ms':>10} {'speedup':>10}")
    print("-" * 70)
    _row(f"stencil apply {m}^3",
         lambda: kernels.neg_laplacian_numba(u3, inv_h2, out3),
         lambda: kernels.neg_laplacian_numpy(u3, inv_h2, out3),
         args.repeats)
    _row(f"recurrence scan {args.scan_steps}x{args.scan_width}",
         lambda: kernels.recurrence_scan_numba(a, w1, w0, drive, y0),
         lambda: kernels.recurrence_scan_numpy(a, w1, w0, drive, y0),
         args.repeats)
    _row(f"tridiagonal solve m={k}",
         lambda: kernels.tridiag_solve_numba(lower, diag, upper, rhs),
         lambda: kernels.tridiag_solve_numpy(lower, diag, upper, rhs),
         args.repeats)

    # agreement spot check so a fast-but-wrong kernel cannot slip through
    lap_gap = float(np.max(np.abs(
        kernels.neg_laplacian_numba(u3, inv_h2)
        - kernels.neg_laplacian_numpy(u3, inv_h2))))
    scan_gap = float(np.max(np.abs(
        kernels.recurrence_scan_numba(a, w1, w0, drive, y0)
        - kernels.recurrence_scan_numpy(a, w1, w0, drive, y0))))
    tri_gap = float(np.max(np.abs(
        kernels.tridiag_solve_numba(lower, diag, upper, rhs)
        - kernels.tridiag_solve_numpy(lower, diag, upper, rhs))))
    print("-" * 70)
    print(f"variant agreement: stencil {lap_gap:.2e}, scan {scan_gap:.2e}, "
          f"tridiag {tri_gap:.2e}")
    print(f"selected backend: {kernels.backend_name()}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
