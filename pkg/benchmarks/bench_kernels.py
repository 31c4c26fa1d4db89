"""Benchmark the compiled kernel backend against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from vqspeech import kernels


def timeit(fn, repeats):
    fn()  # warmup
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    cases = {
        "conv1d_forward (257->128, k7, T124)": lambda be: (
            lambda x, w, b: (lambda: be.conv1d_forward(x, w, b))
        )(
            rng.normal(size=(257, 124)).astype(np.float32),
            rng.normal(size=(128, 257, 7)).astype(np.float32),
            rng.normal(size=128).astype(np.float32),
        ),
        "conv1d_grad_input (128->257)": lambda be: (
            lambda g, w: (lambda: be.conv1d_grad_input(g, w))
        )(
            rng.normal(size=(128, 124)).astype(np.float32),
            rng.normal(size=(128, 257, 7)).astype(np.float32),
        ),
        "conv1d_grad_weight (257->128)": lambda be: (
            lambda x, g: (lambda: be.conv1d_grad_weight(x, g, 7))
        )(
            rng.normal(size=(257, 124)).astype(np.float32),
            rng.normal(size=(128, 124)).astype(np.float32),
        ),
        "l2_argmin (T124 x V2048, d32)": lambda be: (
            lambda q, c: (lambda: be.l2_argmin(q, c))
        )(
            rng.normal(size=(124, 32)),
            rng.normal(size=(2048, 32)),
        ),
    }

    backends = [kernels.get_backend(n) for n in kernels.available_backends()]
    print(f"active backend: {kernels.BACKEND}")
    header = f"{'kernel':38s}" + "".join(f"{be.NAME:>12s}" for be in backends)
    print(header)
    for name, make in cases.items():
        row = f"{name:38s}"
        for be in backends:
            fn = make(be)
            row += f"{timeit(fn, args.repeats) * 1e3:>10.2f}ms"
        print(row)


if __name__ == "__main__":
    main()
