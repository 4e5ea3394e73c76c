"""Timing comparison between the pure NumPy and compiled kernels.

Runs the fused video_loss_grad on representative problem sizes and
prints per-call microseconds for each importable backend, plus the
speedup of the compiled one when present. Invoke as

    python benchmarks/bench_kernels.py [--repeats 2000]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from maskalign import kernels


def _instance(rng: np.random.Generator, n: int, k: int, d: int):
    frames = rng.standard_normal((n, d))
    captions = rng.standard_normal((k, d))
    syn = rng.standard_normal((k - 1, d)) if k > 1 else None
    centers = rng.uniform(0.1, 0.9, size=k)
    widths = rng.uniform(0.1, 0.5, size=k)
    return (
        frames, captions, syn, centers, widths,
        kernels.GAUSSIAN, kernels.POOL_PLAIN,
        4.0, 0.1, 0.6, 0.25, 1.0, True, True, 1e-8,
    )


def _time_call(fn, args, repeats: int) -> float:
    fn(*args)  # warm up
    start = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - start) / repeats * 1e6


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = np.random.default_rng(args.seed)
    sizes = [(64, 3, 16), (64, 5, 16), (128, 8, 32), (256, 12, 64)]
    names = kernels.backend_names()
    print(f"active backend: {kernels.BACKEND}")
    header = f"{'N':>5} {'K':>3} {'D':>3}" + "".join(f" {n:>14}" for n in names)
    if "compiled" in names and "pure" in names:
        header += f" {'speedup':>9}"
    print(header)
    for n, k, d in sizes:
        inst = _instance(rng, n, k, d)
        row = f"{n:>5} {k:>3} {d:>3}"
        per = {}
        for name in names:
            per[name] = _time_call(kernels.get_kernel(name), inst, args.repeats)
            row += f" {per[name]:>12.1f}us"
        if "compiled" in per and "pure" in per:
            row += f" {per['pure'] / per['compiled']:>8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
