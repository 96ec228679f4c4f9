"""Time the numba kernels against their pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--size 1024]

Both flavours are imported side by side, so no environment flag is needed.
Each kernel is first called once to trigger compilation, and its output is
checked against the other flavour before timing.
"""

import argparse
import math
import sys
import timeit

import numpy as np

from nsmc import kernels
from nsmc._accel import HAVE_NUMBA
from nsmc.sampling import random_directions


def _accumulate(fn, mode, logs, signs):
    def run():
        state = kernels.new_state()
        # oracle far away so the whole block is consumed
        fn(state, logs, signs, mode, 0.0, 50.0, 1.0, 0.1, 1000, 100)
        return state
    return run


def cases(size, n, rng):
    dirs = random_directions(rng, size, n)
    offset = rng.uniform(-0.1, 0.1, n)
    half = np.full(n, 0.5)
    logs = n * np.log(rng.random(size))
    signs = np.ones(size)
    rows = rng.normal(size=(size, 4)) * 50
    row_signs = np.where(rng.random((size, 4)) < 0.5, -1.0, 1.0)
    return [
        ("box_extents", lambda: kernels.box_extents_numba(offset, half, dirs),
         lambda: kernels.box_extents_numpy(offset, half, dirs)),
        ("signed_row_logsumexp",
         lambda: kernels.signed_row_logsumexp_numba(rows, row_signs),
         lambda: kernels.signed_row_logsumexp_numpy(rows, row_signs)),
        ("accumulate[fixed]",
         _accumulate(kernels.accumulate_numba, kernels.MODE_FIXED, logs, signs),
         _accumulate(kernels.accumulate_numpy, kernels.MODE_FIXED, logs, signs)),
        ("accumulate[oracle]",
         _accumulate(kernels.accumulate_numba, kernels.MODE_ORACLE, logs, signs),
         _accumulate(kernels.accumulate_numpy, kernels.MODE_ORACLE, logs, signs)),
    ]


def _close(a, b):
    a = a if isinstance(a, tuple) else (a,)
    b = b if isinstance(b, tuple) else (b,)
    return all(np.allclose(x, y, rtol=1e-9, atol=0, equal_nan=True) for x, y in zip(a, b))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--size", type=int, default=1024, help="rows per call (one block)")
    p.add_argument("--dim", type=int, default=50)
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--number", type=int, default=200)
    args = p.parse_args(argv)
    if not HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'numba us':>12}{'numpy us':>12}{'speedup':>10}")
    for name, fast, slow in cases(args.size, args.dim, rng):
        if not _close(fast(), slow()):
            print(f"{name}: flavours disagree", file=sys.stderr)
            return 2
        t_fast = min(timeit.repeat(fast, number=args.number, repeat=args.repeat))
        t_slow = min(timeit.repeat(slow, number=args.number, repeat=args.repeat))
        us = 1e6 / args.number
        ratio = t_slow / t_fast if t_fast > 0 else math.inf
        print(f"{name:<24}{t_fast * us:>12.1f}{t_slow * us:>12.1f}{ratio:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
