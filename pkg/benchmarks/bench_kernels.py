"""Gram-matrix timing: numba kernel vs the pure-numpy path.

    python benchmarks/bench_kernels.py [--sizes 100,300,1000] [--dim 4] [--repeat 5]

Also checks that both paths agree to within 1e-12.
"""
import argparse
import time

import numpy as np

from cmbo import _accel


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="100,300,1000")
    ap.add_argument("--dim", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if _accel.gram_numba is None:
        print("numba not installed; only the numpy path is available")
        return 1
    rng = np.random.default_rng(0)
    ls = np.full(args.dim, 0.3)
    # compile once so the timings below exclude JIT warm-up
    t0 = time.perf_counter()
    _accel.gram_numba(rng.uniform(size=(2, args.dim)), rng.uniform(size=(2, args.dim)), ls,
                      _accel.MATERN32)
    print(f"numba compile: {time.perf_counter() - t0:.2f} s")

    print(f"{'n':>6} {'kernel':>9} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max diff':>10}")
    for n in (int(s) for s in args.sizes.split(",")):
        X = rng.uniform(size=(n, args.dim))
        for name, kind in (("matern12", _accel.MATERN12), ("matern32", _accel.MATERN32),
                           ("rbf", _accel.RBF)):
            a = _accel.gram_numpy(X, X, ls, kind)
            b = _accel.gram_numba(X, X, ls, kind)
            diff = float(np.abs(a - b).max())
            t_np = best_of(lambda: _accel.gram_numpy(X, X, ls, kind), args.repeat)
            t_nb = best_of(lambda: _accel.gram_numba(X, X, ls, kind), args.repeat)
            print(f"{n:>6} {name:>9} {1e3 * t_np:>10.2f} {1e3 * t_nb:>10.2f} "
                  f"{t_np / t_nb:>8.2f} {diff:>10.1e}")
            if diff > 1e-12:
                print("  paths disagree beyond 1e-12")
                return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
