"""Benchmark the numpy and numba kernel backends on training-shaped inputs.

Run with `python -m neuromark.bench`. The table behind the default "auto"
backend mapping comes from here: BLAS-backed im2col wins the convolution
family, the jit kernels win pooling and bilinear resampling.
"""
from __future__ import annotations

import time

import numpy as np

from . import backend


def _time(fn, *args, repeat=5):
    fn(*args)  # warm up (first numba call compiles)
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def _cases(rng):
    # shapes from one base-recognizer training step at batch 32
    x1 = rng.standard_normal((32, 96, 20, 20)).astype(np.float32)  # padded 16x16
    k1 = rng.standard_normal((96, 96, 5, 5)).astype(np.float32)
    gy1 = rng.standard_normal((32, 96, 16, 16)).astype(np.float32)
    img = rng.uniform(0, 1, (32, 3, 32, 32)).astype(np.float32)
    aff = np.tile(np.array([1, 0, 0, 0, 1, 0], np.float32), (32, 1))
    aff += rng.normal(0, 0.1, aff.shape).astype(np.float32)
    fill = np.full((32, 3, 32, 32), 0.5, np.float32)
    pool_in = rng.standard_normal((32, 96, 32, 32)).astype(np.float32)
    blur_k = rng.uniform(0.01, 0.1, (32, 5, 5)).astype(np.float32)
    return x1, k1, gy1, img, aff, fill, pool_in, blur_k


def run():
    rng = np.random.default_rng(0)
    x1, k1, gy1, img, aff, fill, pool_in, blur_k = _cases(rng)
    names = ["numpy"] + (["numba"] if backend.HAS_NUMBA else [])
    rows = []
    for name in names:
        backend.set_backend(name)
        rows.append((
            name,
            _time(backend.corr2d, x1, k1),
            _time(backend.corr2d_grad_input, gy1, k1),
            _time(backend.corr2d_grad_kernel, x1, gy1),
            _time(lambda x: backend.maxpool2(x), pool_in),
            _time(backend.blur2d, img, blur_k),
            _time(backend.bilinear, img, aff, 32, 32, fill),
            _time(backend.bilinear_grad_image, img, aff, 32, 32),
        ))
    backend.set_backend("auto")
    header = ["backend", "conv fwd", "conv dx", "conv dk", "maxpool", "blur", "bilinear", "bilinear dx"]
    fmt = "{:>8}" + "{:>12}" * (len(header) - 1)
    print(fmt.format(*header))
    for row in rows:
        print(fmt.format(row[0], *[f"{v * 1e3:.2f}ms" for v in row[1:]]))
    if len(rows) == 2:
        print("\nratios (numpy/numba):",
              "  ".join(f"{a / b:.2f}" for a, b in zip(rows[0][1:], rows[1][1:])))
    print(f"\nactive backend after reset: {backend.backend_name()}")


if __name__ == "__main__":
    run()
