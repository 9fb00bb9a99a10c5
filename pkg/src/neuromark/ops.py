"""Forward/backward pairs for every differentiable operation.

Each forward returns ``(output, cache)``; the matching ``*_backward``
consumes the upstream gradient plus the cache and returns input gradients
in argument order. There is deliberately no tape or graph: the networks
chain these calls explicitly, forwards in order and backwards reversed.

Arrays pass through in their input dtype. Training runs in float32;
gradient checks cast to float64 for headroom.
"""
from __future__ import annotations

import numpy as np

from . import backend

PADDING_MODES = ("same-zero", "same-replicate", "valid")


# ---------------------------------------------------------------------------
# dense


def dense(x, w, b):
    """y = x @ w.T + b with x (B,I), w (O,I), b (O,)."""
    if x.ndim != 2 or w.ndim != 2:
        raise ValueError(f"dense: expected 2-d x and w, got x{x.shape} w{w.shape}")
    if x.shape[1] != w.shape[1] or b.shape != (w.shape[0],):
        raise ValueError(
            f"dense: shapes do not conform, x{x.shape} w{w.shape} b{b.shape}"
        )
    y = x @ w.T + b
    return y, (x, w)


def dense_backward(gy, cache):
    x, w = cache
    gx = gy @ w
    gw = gy.T @ x
    gb = gy.sum(axis=0)
    return gx, gw, gb


# ---------------------------------------------------------------------------
# convolution


def conv2d(x, k, bias=None, padding="same-zero"):
    """Cross-correlation of x (B,C,H,W) with k (O,C,kh,kw), odd kernels only.

    padding is one of same-zero, same-replicate, valid. bias may be None
    (used by fixed filter stages such as blur).
    """
    if padding not in PADDING_MODES:
        raise ValueError(f"conv2d: unknown padding {padding!r}, expected {PADDING_MODES}")
    o, ci, kh, kw = k.shape
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv2d: kernel size must be odd, got {kh}x{kw}")
    if x.ndim != 4 or x.shape[1] != ci:
        raise ValueError(f"conv2d: input x{x.shape} incompatible with kernel k{k.shape}")
    if bias is not None and bias.shape != (o,):
        raise ValueError(f"conv2d: bias shape {bias.shape} does not match {o} filters")
    if padding == "valid":
        xp = np.ascontiguousarray(x)
    else:
        mode = "constant" if padding == "same-zero" else "edge"
        xp = np.pad(x, ((0, 0), (0, 0), (kh // 2, kh // 2), (kw // 2, kw // 2)), mode=mode)
    y = backend.corr2d(xp, np.ascontiguousarray(k))
    if bias is not None:
        y += bias[None, :, None, None]
    return y, (xp, k, padding, x.shape, bias is not None)


def _fold_pad_grad(gxp, padding, xshape, kh, kw):
    if padding == "valid":
        return gxp
    ph, pw = kh // 2, kw // 2
    if padding == "same-replicate":
        # adjoint of edge padding: border strips re-accumulate into the edge
        # rows/cols; doing rows first then columns routes corners correctly
        gxp = gxp.copy()
        if ph:
            gxp[:, :, ph] += gxp[:, :, :ph].sum(axis=2)
            gxp[:, :, -ph - 1] += gxp[:, :, -ph:].sum(axis=2)
        if pw:
            gxp[:, :, :, pw] += gxp[:, :, :, :pw].sum(axis=3)
            gxp[:, :, :, -pw - 1] += gxp[:, :, :, -pw:].sum(axis=3)
    h, w = xshape[2], xshape[3]
    return np.ascontiguousarray(gxp[:, :, ph:ph + h, pw:pw + w])


def conv2d_backward(gy, cache, with_input_grad=True, with_kernel_grad=True):
    xp, k, padding, xshape, has_bias = cache
    gy = np.ascontiguousarray(gy)
    gx = gk = gb = None
    if with_input_grad:
        gxp = backend.corr2d_grad_input(gy, np.ascontiguousarray(k))
        gx = _fold_pad_grad(gxp, padding, xshape, k.shape[2], k.shape[3])
    if with_kernel_grad:
        gk = backend.corr2d_grad_kernel(xp, gy)
        gb = gy.sum(axis=(0, 2, 3)) if has_bias else None
    return gx, gk, gb


# ---------------------------------------------------------------------------
# pooling and resampling


def maxpool2(x):
    """2x2 max pooling; ties resolve to the first element in row-major scan."""
    if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise ValueError(f"maxpool2: spatial dims must be even, got {x.shape}")
    y, idx = backend.maxpool2(np.ascontiguousarray(x))
    return y, idx


def maxpool2_backward(gy, cache):
    return backend.maxpool2_grad(np.ascontiguousarray(gy), cache)


def avgpool2(x):
    """2x2 average pooling."""
    if x.ndim != 4 or x.shape[2] % 2 or x.shape[3] % 2:
        raise ValueError(f"avgpool2: spatial dims must be even, got {x.shape}")
    b, c, h, w = x.shape
    y = x.reshape(b, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    return y.astype(x.dtype, copy=False), None


def avgpool2_backward(gy, cache):
    g = np.repeat(np.repeat(gy, 2, axis=2), 2, axis=3)
    return (g * gy.dtype.type(0.25)).astype(gy.dtype, copy=False)


def upsample2(x):
    """Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block."""
    y = np.repeat(np.repeat(x, 2, axis=-2), 2, axis=-1)
    return y, None


def upsample2_backward(gy, cache):
    h, w = gy.shape[-2] // 2, gy.shape[-1] // 2
    lead = gy.shape[:-2]
    return gy.reshape(lead + (h, 2, w, 2)).sum(axis=(-3, -1))


def affine_sample(image, affine, out_shape, fill):
    """Bilinear sampling of image (C,h,w) onto an (C,H,W) canvas.

    affine is the 6-vector [a,b,tx,c,d,ty] of the 2x3 matrix that maps
    normalized output coordinates to normalized source coordinates, origin
    at the image center, coordinates in [-1,1] with the align-corners-false
    convention (pixel centers at (i+0.5)/size). Output pixels whose source
    point leaves the image take the fill value at that location, blending
    bilinearly across the boundary. Backward is w.r.t. the image only.
    """
    out_h, out_w = out_shape
    a = np.asarray(affine, dtype=image.dtype).reshape(1, 6)
    if fill.shape != (image.shape[0], out_h, out_w):
        raise ValueError(f"affine_sample: fill shape {fill.shape} does not match output")
    y = backend.bilinear(
        np.ascontiguousarray(image[None]), a, out_h, out_w, np.ascontiguousarray(fill[None])
    )[0]
    return y, (a, image.shape)


def affine_sample_backward(gy, cache):
    a, image_shape = cache
    gimg = backend.bilinear_grad_image(
        np.ascontiguousarray(gy[None]), a, image_shape[1], image_shape[2]
    )[0]
    return gimg


# ---------------------------------------------------------------------------
# elementwise


def relu(x):
    y = np.maximum(x, 0)
    return y, x


def relu_backward(gy, cache):
    return gy * (cache > 0)


def sigmoid(x):
    # split by sign so exp never overflows
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1 / (1 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1 + ex)
    return y, y


def sigmoid_backward(gy, cache):
    return gy * cache * (1 - cache)


def add(a, b):
    if a.shape != b.shape:
        raise ValueError(f"add: shape mismatch {a.shape} vs {b.shape}")
    return a + b, None


def add_backward(gy, cache):
    return gy, gy


def mul(a, b):
    if a.shape != b.shape:
        raise ValueError(f"mul: shape mismatch {a.shape} vs {b.shape}")
    return a * b, (a, b)


def mul_backward(gy, cache):
    a, b = cache
    return gy * b, gy * a


def scale(x, s):
    """Multiply by a python scalar."""
    return x * x.dtype.type(s), s


def scale_backward(gy, cache):
    return gy * gy.dtype.type(cache)


def power(x, exponent):
    """Elementwise x ** exponent for scalar exponent.

    Non-integer exponents require a nonnegative base; the gradient further
    assumes a strictly positive base (probe away from zero).
    """
    if exponent != round(exponent) and np.any(x < 0):
        raise ValueError("power: negative base with non-integer exponent")
    y = x ** x.dtype.type(exponent)
    return y, (x, exponent)


def power_backward(gy, cache):
    x, exponent = cache
    e = x.dtype.type(exponent)
    return gy * e * x ** (e - 1)


# ---------------------------------------------------------------------------
# batch normalization


class BatchNormState:
    """Running mean/var buffers used in eval mode."""

    __slots__ = ("running_mean", "running_var")

    def __init__(self, channels, dtype=np.float32):
        self.running_mean = np.zeros(channels, dtype)
        self.running_var = np.ones(channels, dtype)


def batchnorm(x, gamma, beta, state, mode="train", momentum=0.9, eps=1e-5):
    """Per-channel normalization over all non-channel axes of (B,C,...).

    Train mode normalizes with batch statistics and folds them into the
    running buffers (running = momentum * running + (1-momentum) * batch,
    unbiased variance for the running buffer). Eval mode uses the buffers.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"batchnorm: mode must be train or eval, got {mode!r}")
    c = x.shape[1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"batchnorm: gamma/beta must have shape ({c},)")
    axes = (0,) + tuple(range(2, x.ndim))
    bshape = (1, c) + (1,) * (x.ndim - 2)
    if mode == "train":
        if x.shape[0] < 2:
            raise ValueError("batchnorm: train mode requires batch size >= 2")
        mean = x.mean(axis=axes)
        xhat = x - mean.reshape(bshape)
        var = np.mean(np.square(xhat), axis=axes)
        n = x.size // c
        m = x.dtype.type(momentum)
        state.running_mean[...] = m * state.running_mean + (1 - m) * mean.astype(
            state.running_mean.dtype
        )
        state.running_var[...] = m * state.running_var + (1 - m) * (
            var * n / max(n - 1, 1)
        ).astype(state.running_var.dtype)
        inv = 1 / np.sqrt(var + x.dtype.type(eps))
        xhat *= inv.reshape(bshape)
    else:
        mean = state.running_mean.astype(x.dtype)
        var = state.running_var.astype(x.dtype)
        inv = 1 / np.sqrt(var + x.dtype.type(eps))
        xhat = (x - mean.reshape(bshape)) * inv.reshape(bshape)
    y = gamma.reshape(bshape) * xhat
    y += beta.reshape(bshape)
    return y, (xhat, inv, gamma, axes, bshape, mode)


def batchnorm_backward(gy, cache):
    xhat, inv, gamma, axes, bshape, mode = cache
    ggamma = (gy * xhat).sum(axis=axes)
    gbeta = gy.sum(axis=axes)
    gxhat = gy * gamma.reshape(bshape)
    if mode == "eval":
        gxhat *= inv.reshape(bshape)
        return gxhat, ggamma, gbeta
    n = gy.dtype.type(gy.size // gy.shape[1])
    sum_g = gxhat.sum(axis=axes).reshape(bshape)
    sum_gx = (gxhat * xhat).sum(axis=axes).reshape(bshape)
    gx = xhat * sum_gx
    gx += sum_g
    gx *= -1 / n
    gx += gxhat
    gx *= inv.reshape(bshape)
    return gx, ggamma, gbeta


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(forward, backward, inputs, wrt=None, h=1e-5, rng=None, sample=None):
    """Max relative error of the analytic backward vs central differences.

    The output is contracted with a fixed random vector u and the gradient
    of that scalar is computed both ways for each input index in wrt
    (default: all). Error is reported as ||ga - gn||_inf scaled by
    ||ga||_inf + ||gn||_inf, so exactly linear maps come out at
    machine-epsilon scale. Run with float64 inputs for strict tolerances.

    sample limits the probe to that many coordinates per input (drawn
    without replacement from rng); the default probes every coordinate.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    inputs = list(inputs)
    y, cache = forward(*inputs)
    u = rng.standard_normal(y.shape).astype(y.dtype)
    grads = backward(u, cache)
    if not isinstance(grads, tuple):
        grads = (grads,)
    if wrt is None:
        wrt = tuple(range(len(grads)))
    worst = 0.0
    for idx in wrt:
        ga = np.asarray(grads[idx])
        x = np.asarray(inputs[idx], dtype=np.float64)
        flat = x.reshape(-1)
        if sample is not None and sample < flat.size:
            coords = rng.choice(flat.size, size=sample, replace=False)
        else:
            coords = range(flat.size)
        ga_flat = ga.reshape(-1)
        probed_a = []
        probed_n = []
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            yp, _ = forward(*_swap(inputs, idx, x))
            flat[i] = orig - h
            ym, _ = forward(*_swap(inputs, idx, x))
            flat[i] = orig
            probed_a.append(float(ga_flat[i]))
            probed_n.append(float((u * (yp - ym)).sum()) / (2 * h))
        pa = np.array(probed_a)
        pn = np.array(probed_n)
        scale_ = float(np.abs(pa).max(initial=0.0) + np.abs(pn).max(initial=0.0))
        err = float(np.abs(pa - pn).max(initial=0.0))
        worst = max(worst, err / (scale_ + 1e-300))
    return worst


def _swap(inputs, idx, value):
    out = list(inputs)
    out[idx] = value.astype(np.asarray(inputs[idx]).dtype, copy=False)
    return out
