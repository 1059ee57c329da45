"""Benchmark the switched-state recursion: compiled extension vs NumPy.

Runs the same seeded workload through both backends, checks they agree,
and prints per-size timings with the speedup. Typical use:

    python3 benchmarks/bench_kernels.py --slots 200000 --repeats 5
"""

import argparse
import time

import numpy as np

from raccess._kernels import _reference

try:
    from raccess._kernels import _speedups
except ImportError:
    _speedups = None


def make_workload(n, slots, rng):
    # Spectral radius < 1 in both modes so states stay in range.
    a_closed = rng.standard_normal((n, n))
    a_closed *= 0.5 / max(abs(np.linalg.eigvals(a_closed)))
    a_open = rng.standard_normal((n, n))
    a_open *= 0.9 / max(abs(np.linalg.eigvals(a_open)))
    gamma = (rng.random(slots) < 0.6).astype(np.uint8)
    noise = rng.standard_normal((slots, n))
    x0 = np.zeros(n)
    return a_closed, a_open, gamma, noise, x0


def best_time(func, args, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        func(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument(
        "--n",
        type=int,
        nargs="+",
        default=[1, 2, 4, 8],
        help="state dimensions to benchmark",
    )
    parser.add_argument("--slots", type=int, default=200_000)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if _speedups is None:
        print("compiled extension not built; timing the NumPy backend only")
    rng = np.random.default_rng(args.seed)
    header = f"{'n':>3} {'slots':>8} {'python [ms]':>12}"
    if _speedups is not None:
        header += f" {'compiled [ms]':>14} {'speedup':>8}"
    print(header)
    for n in args.n:
        workload = make_workload(n, args.slots, rng)
        t_py = best_time(_reference.state_recursion, workload, args.repeats)
        line = f"{n:>3} {args.slots:>8} {t_py * 1e3:>12.2f}"
        if _speedups is not None:
            out_py = _reference.state_recursion(*workload)
            out_c = _speedups.state_recursion(*workload)
            np.testing.assert_allclose(out_c, out_py, rtol=0.0, atol=1e-10)
            t_c = best_time(_speedups.state_recursion, workload, args.repeats)
            line += f" {t_c * 1e3:>14.2f} {t_py / t_c:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
