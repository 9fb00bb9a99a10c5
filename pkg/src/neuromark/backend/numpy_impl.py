"""Pure numpy kernels. Convolutions ride BLAS through im2col matrices.

The im2col matrices are built channels-last so the gather copies run over
contiguous (kw, C) chunks; with channels-first windows the copy itself
dominates the matmul. The column buffers are pooled and reused: they are
the largest temporaries by far, and refaulting freshly mapped pages every
call costs several times the copy itself (pronounced under sandboxed
kernels). The pool makes this module single-threaded per process, which
matches the one-writer training model.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

NAME = "numpy"

_POOL: dict = {}


def _workspace(shape, dtype):
    key = (shape, np.dtype(dtype).str)
    buf = _POOL.get(key)
    if buf is None:
        buf = np.empty(shape, dtype)
        _POOL[key] = buf
    return buf


def _im2col_nhwc(xh, kh, kw):
    # (B,Hp,Wp,C) -> (B*Ho*Wo, kh*kw*C), rows in (b, i, j) scan order
    b, hp, wp, c = xh.shape
    ho, wo = hp - kh + 1, wp - kw + 1
    win = sliding_window_view(xh, (kh, kw), axis=(1, 2))   # (B,Ho,Wo,C,kh,kw)
    col = _workspace((b, ho, wo, kh, kw, c), xh.dtype)
    np.copyto(col, win.transpose(0, 1, 2, 4, 5, 3))
    return col.reshape(b * ho * wo, kh * kw * c), ho, wo


def _to_nhwc(x):
    b, c, h, w = x.shape
    out = _workspace((b, h, w, c), x.dtype)
    np.copyto(out, x.transpose(0, 2, 3, 1))
    return out


def corr2d(xp, k):
    """Valid cross-correlation of xp (B,C,Hp,Wp) with k (O,C,kh,kw)."""
    b = xp.shape[0]
    o, c, kh, kw = k.shape
    col, ho, wo = _im2col_nhwc(_to_nhwc(xp), kh, kw)
    km = np.ascontiguousarray(k.transpose(2, 3, 1, 0)).reshape(kh * kw * c, o)
    y = _workspace((b * ho * wo, o), xp.dtype)
    np.matmul(col, km, out=y)
    return np.ascontiguousarray(y.reshape(b, ho, wo, o).transpose(0, 3, 1, 2))


def corr2d_grad_input(gy, k):
    """Gradient of corr2d w.r.t. the padded input: full correlation with the
    spatially flipped kernel, in/out channels swapped."""
    b = gy.shape[0]
    o, c, kh, kw = k.shape
    gh = _to_nhwc(gy)
    hp, wp = gy.shape[2] + kh - 1, gy.shape[3] + kw - 1
    gyp = _workspace((b, hp + kh - 1, wp + kw - 1, o), gy.dtype)
    gyp[...] = 0
    gyp[:, kh - 1:kh - 1 + gy.shape[2], kw - 1:kw - 1 + gy.shape[3]] = gh
    col, _, _ = _im2col_nhwc(gyp, kh, kw)
    kf = np.ascontiguousarray(k[:, :, ::-1, ::-1].transpose(2, 3, 0, 1)).reshape(kh * kw * o, c)
    gxp = _workspace((b * hp * wp, c), gy.dtype)
    np.matmul(col, kf, out=gxp)
    return np.ascontiguousarray(gxp.reshape(b, hp, wp, c).transpose(0, 3, 1, 2))


def corr2d_grad_kernel(xp, gy):
    b, c, hp, wp = xp.shape
    o = gy.shape[1]
    kh, kw = hp - gy.shape[2] + 1, wp - gy.shape[3] + 1
    col, ho, wo = _im2col_nhwc(_to_nhwc(xp), kh, kw)
    g = _to_nhwc(gy).reshape(b * ho * wo, o)
    gk = g.T @ col
    return np.ascontiguousarray(gk.reshape(o, kh, kw, c).transpose(0, 3, 1, 2))


def maxpool2(x):
    """2x2 max pooling; returns output and the uint8 argmax index (0..3) of
    each block in row-major scan order, so ties go to the first index."""
    b, c, h, w = x.shape
    blocks = (
        x.reshape(b, c, h // 2, 2, w // 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, h // 2, w // 2, 4)
    )
    idx = blocks.argmax(axis=-1).astype(np.uint8)
    y = np.take_along_axis(blocks, idx[..., None], axis=-1)[..., 0]
    return np.ascontiguousarray(y), idx


def maxpool2_grad(gy, idx):
    b, c, ho, wo = gy.shape
    blocks = np.zeros((b, c, ho, wo, 4), gy.dtype)
    np.put_along_axis(blocks, idx[..., None].astype(np.int64), gy[..., None], axis=-1)
    return np.ascontiguousarray(
        blocks.reshape(b, c, ho, wo, 2, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(b, c, 2 * ho, 2 * wo)
    )


def blur2d(x, kernels):
    """Depthwise blur with one (kh,kw) kernel per sample, replicate padding."""
    b, c, h, w = x.shape
    kh, kw = kernels.shape[1], kernels.shape[2]
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), mode="edge")
    y = np.zeros_like(x)
    for u in range(kh):
        for v in range(kw):
            y += kernels[:, u, v][:, None, None, None] * xp[:, :, u:u + h, v:v + w]
    return y


def blur2d_grad(gy, kernels):
    b, c, h, w = gy.shape
    kh, kw = kernels.shape[1], kernels.shape[2]
    ph, pw = kh // 2, kw // 2
    gxp = np.zeros((b, c, h + 2 * ph, w + 2 * pw), gy.dtype)
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u:u + h, v:v + w] += kernels[:, u, v][:, None, None, None] * gy
    # adjoint of edge padding: border strips fold back into the edge pixels
    if ph:
        gxp[:, :, ph] += gxp[:, :, :ph].sum(axis=2)
        gxp[:, :, -ph - 1] += gxp[:, :, -ph:].sum(axis=2)
    if pw:
        gxp[:, :, :, pw] += gxp[:, :, :, :pw].sum(axis=3)
        gxp[:, :, :, -pw - 1] += gxp[:, :, :, -pw:].sum(axis=3)
    return np.ascontiguousarray(gxp[:, :, ph:ph + h, pw:pw + w])


def _sample_coords(a, h, w, out_h, out_w, dtype):
    # normalized output grid, align-corners-false: pixel centers at
    # (i + 0.5)/size mapped into [-1, 1]
    xs = 2.0 * (np.arange(out_w, dtype=dtype) + dtype(0.5)) / dtype(out_w) - dtype(1.0)
    ys = 2.0 * (np.arange(out_h, dtype=dtype) + dtype(0.5)) / dtype(out_h) - dtype(1.0)
    a = a.astype(dtype, copy=False)
    sx = a[:, 0, None, None] * xs[None, None, :] + a[:, 1, None, None] * ys[None, :, None] + a[:, 2, None, None]
    sy = a[:, 3, None, None] * xs[None, None, :] + a[:, 4, None, None] * ys[None, :, None] + a[:, 5, None, None]
    px = (sx + dtype(1.0)) * dtype(w / 2.0) - dtype(0.5)
    py = (sy + dtype(1.0)) * dtype(h / 2.0) - dtype(0.5)
    return px, py


def bilinear(img, a, out_h, out_w, fill):
    """Bilinear sampling of img (B,C,h,w) at affine-mapped output coords.

    a is (B,6) row-major [a,b,tx,c,d,ty] mapping normalized output coords to
    normalized source coords. Corners falling outside the image contribute
    the fill image at the output location instead, which blends fill and
    image bilinearly along the boundary.
    """
    b, c, h, w = img.shape
    dt = img.dtype.type
    px, py = _sample_coords(a, h, w, out_h, out_w, dt)
    x0 = np.floor(px)
    y0 = np.floor(py)
    fx = px - x0
    fy = py - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    bidx = np.arange(b)[:, None, None]
    out = np.zeros((b, c, out_h, out_w), img.dtype)
    cover = np.zeros((b, out_h, out_w), img.dtype)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            wgt = (fx if dx else 1 - fx) * (fy if dy else 1 - fy)
            valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            wv = wgt * valid
            xc = np.clip(xi, 0, w - 1)
            yc = np.clip(yi, 0, h - 1)
            for ch in range(c):
                out[:, ch] += wv * img[bidx, ch, yc, xc]
            cover += wv
    out += (1 - cover)[:, None] * fill
    return out


def bilinear_grad_image(gy, a, h, w):
    """Scatter the output gradient back through the bilinear weights."""
    b, c, out_h, out_w = gy.shape
    dt = gy.dtype.type
    px, py = _sample_coords(a, h, w, out_h, out_w, dt)
    x0 = np.floor(px)
    y0 = np.floor(py)
    fx = px - x0
    fy = py - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)
    bidx = np.broadcast_to(np.arange(b)[:, None, None], px.shape)
    gimg = np.zeros((b, c, h, w), gy.dtype)
    for dy in (0, 1):
        for dx in (0, 1):
            xi = x0 + dx
            yi = y0 + dy
            wgt = (fx if dx else 1 - fx) * (fy if dy else 1 - fy)
            valid = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            wv = wgt * valid
            xc = np.clip(xi, 0, w - 1)
            yc = np.clip(yi, 0, h - 1)
            for ch in range(c):
                np.add.at(gimg[:, ch], (bidx, yc, xc), wv * gy[:, ch])
    return gimg
