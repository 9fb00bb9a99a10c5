"""Hot numeric kernels with two interchangeable implementations.

``numpy``   vectorised numpy; convolutions become im2col + BLAS matmuls
``numba``   @njit loop kernels, compiled per dtype, cached on disk

The NEUROMARK_BACKEND environment variable (or :func:`set_backend`) selects
one globally. The default ``auto`` picks per kernel family from the
measurements in ``python -m neuromark.bench``: BLAS wins the matmul-shaped
convolutions by a wide margin, the jit kernels win the gather/scatter bound
resampling and pooling. When numba is unavailable, auto degrades to pure
numpy.
"""
from __future__ import annotations

import os

from . import numpy_impl

try:
    from . import numba_impl

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised on numba-free installs
    numba_impl = None
    HAS_NUMBA = False

_VALID = ("auto", "numpy", "numba")

# kernel families, bound by set_backend below
corr2d = None
corr2d_grad_input = None
corr2d_grad_kernel = None
maxpool2 = None
maxpool2_grad = None
blur2d = None
blur2d_grad = None
bilinear = None
bilinear_grad_image = None

_current = None


def set_backend(name: str) -> None:
    """Bind the kernel family functions; name is auto, numpy, or numba."""
    global corr2d, corr2d_grad_input, corr2d_grad_kernel
    global maxpool2, maxpool2_grad, blur2d, blur2d_grad
    global bilinear, bilinear_grad_image, _current
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}; expected one of {_VALID}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba backend requested but numba is not importable")
    if name == "auto":
        conv = numpy_impl
        gather = numba_impl if HAS_NUMBA else numpy_impl
    elif name == "numpy":
        conv = gather = numpy_impl
    else:
        conv = gather = numba_impl
    corr2d = conv.corr2d
    corr2d_grad_input = conv.corr2d_grad_input
    corr2d_grad_kernel = conv.corr2d_grad_kernel
    maxpool2 = gather.maxpool2
    maxpool2_grad = gather.maxpool2_grad
    blur2d = gather.blur2d
    blur2d_grad = gather.blur2d_grad
    bilinear = gather.bilinear
    bilinear_grad_image = gather.bilinear_grad_image
    _current = name


def backend_name() -> str:
    return _current


set_backend(os.environ.get("NEUROMARK_BACKEND", "auto").lower())
