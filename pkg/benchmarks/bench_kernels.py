"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints one line per kernel with the best wall time of each backend and the speedup.
"""

import argparse
import timeit

import numpy as np

from contest_opt import _pykernels

try:
    from contest_opt import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    theta = np.linspace(0.0, 1.0, 20001)
    Q = theta**3
    sig = rng.random((20000, 10))
    lo, hi = np.array([0.2, 0.6]), np.array([0.4, 0.8])
    C, S = 201, 100_000
    cs, os_ = np.sort(rng.random(C) * 2.0), rng.random(S)
    cp, op = rng.integers(-1, 2, C).astype(np.int64), rng.integers(-1, 2, S).astype(np.int64)
    cu, ou, cr, orr = rng.random(C), rng.random(S), rng.random(C), rng.random(S)
    types, keys = rng.random((20000, 10)), rng.random((20000, 10))
    return {
        "canonical_sweep (M=20000)": ("canonical_sweep", (theta, Q, 1.0, 0.0)),
        "coarse_allocate (20000x10)": ("coarse_allocate", (sig, lo, hi, 3.0)),
        "pair_rule_moments (201x1e5)": ("pair_rule_moments", (cs, cp, cu, cr, os_, op, ou, orr, C - 1)),
        "vcg_utilities (20000x10)": ("vcg_utilities", (types, keys, 3, 1.0)),
    }


def best(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; run `pip install -e . --no-build-isolation` first")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numpy [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s}")
    for label, (name, a) in cases(rng).items():
        tp = best(getattr(_pykernels, name), a, args.repeat)
        if _ckernels is None:
            print(f"{label:32s} {1e3 * tp:12.2f} {'-':>14s} {'-':>8s}")
            continue
        tc = best(getattr(_ckernels, name), a, args.repeat)
        print(f"{label:32s} {1e3 * tp:12.2f} {1e3 * tc:14.2f} {tp / tc:7.1f}x")


if __name__ == "__main__":
    main()
