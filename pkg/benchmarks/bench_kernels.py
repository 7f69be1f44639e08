"""Compare the compiled and NumPy upwind kernels.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 20]

Prints the median time per call for each available backend on block shapes
typical of subdomain (K factor) and full-tensor sweeps, plus the speedup.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from rt_dlra.kernels import available_backends, upwind_diff

SHAPES = [(36, 36, 8), (36, 36, 40), (120, 120, 16), (84, 84, 64)]


def bench(shape, axis, backend, repeat):
    rng = np.random.default_rng(0)
    n0, n1, m = shape
    a = rng.standard_normal(shape)
    line = n1 if axis == 0 else n0
    lo, hi = rng.standard_normal((2, line, m))
    signs = rng.integers(-1, 2, m).astype(np.int8)
    scale = rng.uniform(-1.0, 1.0, m)
    call = lambda: upwind_diff(a, lo, hi, signs, float(n0), axis, scale, backend=backend)  # noqa: E731
    call()
    per_call = timeit.repeat(call, number=5, repeat=repeat)
    return float(np.median(per_call)) / 5


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args(argv)
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    header = f"{'shape':>16} {'axis':>4}" + "".join(f"{b:>12}" for b in backends)
    if "cython" in backends:
        header += f"{'speedup':>9}"
    print(header)
    for shape in SHAPES:
        for axis in (0, 1):
            times = {b: bench(shape, axis, b, args.repeat) for b in backends}
            row = f"{str(shape):>16} {axis:>4}" + "".join(
                f"{times[b] * 1e6:10.1f}us" for b in backends)
            if "cython" in times:
                row += f"{times['python'] / times['cython']:8.2f}x"
            print(row)


if __name__ == "__main__":
    main()
