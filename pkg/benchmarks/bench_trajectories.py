"""Wall-clock comparison of the numba and numpy trajectory backends.

Usage::

    python3 benchmarks/bench_trajectories.py [--n 100000] [--repeat 3]

Both backends consume the same random streams, so the benchmark also checks
that their click records agree.
"""
import argparse
import time

import numpy as np

from dqdwtd._accel import HAVE_NUMBA
from dqdwtd.model import ModelParams, build_model, initial_ket
from dqdwtd.trajectories import simulate_records


def setup(alpha, coop, n):
    m = build_model(ModelParams.from_dimensionless(alpha, coop, n_max=n))
    return m.H, m.channels, initial_ket(n, n)


def best_of(repeat, fn):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100_000, help="trajectories per run")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    backends = ["numpy"] + (["numba"] if HAVE_NUMBA else [])
    if not HAVE_NUMBA:
        print("numba unavailable or disabled; timing numpy only")
    print(f"{'photons':>7} {'backend':>8} {'seconds':>10} {'traj/s':>12} {'speedup':>8}")
    for n in (1, 2):
        h, ch, psi = setup(1.0, 1.0, n)
        if HAVE_NUMBA:
            # compile outside the timed region
            simulate_records(h, ch, psi, 10, 0, 200.0, backend="numba")
        results = {}
        for b in backends:
            results[b] = best_of(args.repeat, lambda: simulate_records(h, ch, psi, args.n, args.seed, 200.0,
                                                                       backend=b))
        base = results["numpy"][0]
        for b in backends:
            sec = results[b][0]
            print(f"{n:>7} {b:>8} {sec:>10.3f} {args.n / sec:>12.0f} {base / sec:>8.1f}")
        if HAVE_NUMBA:
            a, c = results["numpy"][1], results["numba"][1]
            same = np.array_equal(a[1], c[1]) and np.array_equal(a[3], c[3])
            print(f"{'':>7} records agree: {same}")


if __name__ == "__main__":
    main()
