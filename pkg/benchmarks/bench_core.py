"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_core.py [--repeat N] [--quick]
"""

import argparse
import timeit

import numpy as np

from fracdt.analysis import ball_offsets
from fracdt.backend import KERNEL_NAMES, available_backends


def cases(quick):
    rng = np.random.default_rng(0)
    P = 2**14 if quick else 2**17
    m1 = 2**12 if quick else 2**18
    m2 = 64 if quick else 256
    S = np.cumsum(rng.normal(size=(66, P)), axis=0)
    f1 = rng.normal(size=m1)
    f2 = rng.normal(size=(m2, m2))
    offs = ball_offsets(2, 6.0)
    return {
        "range_scan": (S, 2),
        "mean_oscillation_1d": (f1, 64),
        "window_max_1d": (f1, 64),
        "mean_oscillation_2d": (f2, offs),
        "offset_max_2d": (f2, offs),
    }, {"range_scan": f"66 x {P}", "mean_oscillation_1d": f"m={m1}, w=64", "window_max_1d": f"m={m1}, w=64",
        "mean_oscillation_2d": f"{m2}^2, {len(offs)} offsets", "offset_max_2d": f"{m2}^2, {len(offs)} offsets"}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--quick", action="store_true", help="small inputs")
    args = parser.parse_args(argv)
    backends = available_backends()
    inputs, sizes = cases(args.quick)
    names = sorted(backends)
    print(f"{'kernel':22s} {'input':20s} " + " ".join(f"{n + ' [ms]':>14s}" for n in names) + f" {'speedup':>9s}")
    for kernel in KERNEL_NAMES:
        row = {}
        outs = {}
        for name in names:
            fn = getattr(backends[name], kernel)
            outs[name] = fn(*inputs[kernel])
            row[name] = min(timeit.repeat(lambda: fn(*inputs[kernel]), number=1, repeat=args.repeat)) * 1e3
        if len(names) > 1:
            assert np.allclose(outs["cython"], outs["python"], atol=1e-10), kernel
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{kernel:22s} {sizes[kernel]:20s} " + " ".join(f"{row[n]:14.2f}" for n in names) + f" {speed:9.1f}x")


if __name__ == "__main__":
    main()
