"""Jit-compiled loop kernels. Same contracts as numpy_impl.

The convolution kernels parallelize over independent output slices, so
results do not depend on the thread count and every run is bit-identical
for a fixed backend. The pooling and resampling kernels stay serial: they
are small per call, and parallel dispatch would contend with the BLAS
thread pool that runs between them.
"""
from __future__ import annotations

import numpy as np
from numba import njit, prange

NAME = "numba"


@njit(cache=True, parallel=True, fastmath=True)
def corr2d(xp, k):
    b, c, hp, wp = xp.shape
    o, _, kh, kw = k.shape
    ho = hp - kh + 1
    wo = wp - kw + 1
    y = np.zeros((b, o, ho, wo), xp.dtype)
    for bo in prange(b * o):
        bi = bo // o
        oi = bo % o
        for ci in range(c):
            for u in range(kh):
                for v in range(kw):
                    kv = k[oi, ci, u, v]
                    for i in range(ho):
                        for j in range(wo):
                            y[bi, oi, i, j] += kv * xp[bi, ci, i + u, j + v]
    return y


@njit(cache=True, parallel=True, fastmath=True)
def corr2d_grad_input(gy, k):
    b, o, ho, wo = gy.shape
    _, c, kh, kw = k.shape
    hp = ho + kh - 1
    wp = wo + kw - 1
    gxp = np.zeros((b, c, hp, wp), gy.dtype)
    for bc in prange(b * c):
        bi = bc // c
        ci = bc % c
        for oi in range(o):
            for u in range(kh):
                for v in range(kw):
                    kv = k[oi, ci, u, v]
                    for i in range(ho):
                        for j in range(wo):
                            gxp[bi, ci, i + u, j + v] += kv * gy[bi, oi, i, j]
    return gxp


@njit(cache=True, parallel=True, fastmath=True)
def corr2d_grad_kernel(xp, gy):
    b, c, hp, wp = xp.shape
    o, ho, wo = gy.shape[1], gy.shape[2], gy.shape[3]
    kh = hp - ho + 1
    kw = wp - wo + 1
    gk = np.zeros((o, c, kh, kw), gy.dtype)
    for oc in prange(o * c):
        oi = oc // c
        ci = oc % c
        for u in range(kh):
            for v in range(kw):
                acc = gy.dtype.type(0.0)
                for bi in range(b):
                    for i in range(ho):
                        for j in range(wo):
                            acc += xp[bi, ci, i + u, j + v] * gy[bi, oi, i, j]
                gk[oi, ci, u, v] = acc
    return gk


@njit(cache=True)
def blur2d(x, kernels):
    b, c, h, w = x.shape
    kh, kw = kernels.shape[1], kernels.shape[2]
    ph, pw = kh // 2, kw // 2
    y = np.empty_like(x)
    for bi in range(b):
        for ci in range(c):
            for i in range(h):
                for j in range(w):
                    acc = x.dtype.type(0.0)
                    for u in range(kh):
                        ii = i + u - ph
                        if ii < 0:
                            ii = 0
                        elif ii >= h:
                            ii = h - 1
                        for v in range(kw):
                            jj = j + v - pw
                            if jj < 0:
                                jj = 0
                            elif jj >= w:
                                jj = w - 1
                            acc += kernels[bi, u, v] * x[bi, ci, ii, jj]
                    y[bi, ci, i, j] = acc
    return y


@njit(cache=True)
def blur2d_grad(gy, kernels):
    b, c, h, w = gy.shape
    kh, kw = kernels.shape[1], kernels.shape[2]
    ph, pw = kh // 2, kw // 2
    gx = np.zeros_like(gy)
    for bi in range(b):
        for ci in range(c):
            for i in range(h):
                for j in range(w):
                    g = gy[bi, ci, i, j]
                    for u in range(kh):
                        ii = i + u - ph
                        if ii < 0:
                            ii = 0
                        elif ii >= h:
                            ii = h - 1
                        for v in range(kw):
                            jj = j + v - pw
                            if jj < 0:
                                jj = 0
                            elif jj >= w:
                                jj = w - 1
                            gx[bi, ci, ii, jj] += kernels[bi, u, v] * g
    return gx


@njit(cache=True)
def maxpool2(x):
    b, c, h, w = x.shape
    ho = h // 2
    wo = w // 2
    y = np.empty((b, c, ho, wo), x.dtype)
    idx = np.empty((b, c, ho, wo), np.uint8)
    for bc in range(b * c):
        bi = bc // c
        ci = bc % c
        for i in range(ho):
            for j in range(wo):
                best = x[bi, ci, 2 * i, 2 * j]
                arg = np.uint8(0)
                # strict > keeps the first maximum in row-major block order
                v = x[bi, ci, 2 * i, 2 * j + 1]
                if v > best:
                    best = v
                    arg = np.uint8(1)
                v = x[bi, ci, 2 * i + 1, 2 * j]
                if v > best:
                    best = v
                    arg = np.uint8(2)
                v = x[bi, ci, 2 * i + 1, 2 * j + 1]
                if v > best:
                    best = v
                    arg = np.uint8(3)
                y[bi, ci, i, j] = best
                idx[bi, ci, i, j] = arg
    return y, idx


@njit(cache=True)
def maxpool2_grad(gy, idx):
    b, c, ho, wo = gy.shape
    gx = np.zeros((b, c, 2 * ho, 2 * wo), gy.dtype)
    for bc in range(b * c):
        bi = bc // c
        ci = bc % c
        for i in range(ho):
            for j in range(wo):
                a = idx[bi, ci, i, j]
                gx[bi, ci, 2 * i + a // 2, 2 * j + a % 2] = gy[bi, ci, i, j]
    return gx


@njit(cache=True)
def bilinear(img, a, out_h, out_w, fill):
    b, c, h, w = img.shape
    out = np.empty((b, c, out_h, out_w), img.dtype)
    one = img.dtype.type(1.0)
    half = img.dtype.type(0.5)
    two = img.dtype.type(2.0)
    hw = img.dtype.type(w / 2.0)
    hh = img.dtype.type(h / 2.0)
    for bi in range(b):
        a0 = img.dtype.type(a[bi, 0])
        a1 = img.dtype.type(a[bi, 1])
        a2 = img.dtype.type(a[bi, 2])
        a3 = img.dtype.type(a[bi, 3])
        a4 = img.dtype.type(a[bi, 4])
        a5 = img.dtype.type(a[bi, 5])
        for i in range(out_h):
            yn = two * (img.dtype.type(i) + half) / img.dtype.type(out_h) - one
            for j in range(out_w):
                xn = two * (img.dtype.type(j) + half) / img.dtype.type(out_w) - one
                sx = a0 * xn + a1 * yn + a2
                sy = a3 * xn + a4 * yn + a5
                px = (sx + one) * hw - half
                py = (sy + one) * hh - half
                x0 = int(np.floor(px))
                y0 = int(np.floor(py))
                fx = px - img.dtype.type(x0)
                fy = py - img.dtype.type(y0)
                w00 = (one - fy) * (one - fx)
                w01 = (one - fy) * fx
                w10 = fy * (one - fx)
                w11 = fy * fx
                for ch in range(c):
                    acc = img.dtype.type(0.0)
                    cover = img.dtype.type(0.0)
                    if 0 <= y0 < h and 0 <= x0 < w:
                        acc += w00 * img[bi, ch, y0, x0]
                        cover += w00
                    if 0 <= y0 < h and 0 <= x0 + 1 < w:
                        acc += w01 * img[bi, ch, y0, x0 + 1]
                        cover += w01
                    if 0 <= y0 + 1 < h and 0 <= x0 < w:
                        acc += w10 * img[bi, ch, y0 + 1, x0]
                        cover += w10
                    if 0 <= y0 + 1 < h and 0 <= x0 + 1 < w:
                        acc += w11 * img[bi, ch, y0 + 1, x0 + 1]
                        cover += w11
                    out[bi, ch, i, j] = acc + (one - cover) * fill[bi, ch, i, j]
    return out


@njit(cache=True)
def bilinear_grad_image(gy, a, h, w):
    b, c, out_h, out_w = gy.shape
    gimg = np.zeros((b, c, h, w), gy.dtype)
    one = gy.dtype.type(1.0)
    half = gy.dtype.type(0.5)
    two = gy.dtype.type(2.0)
    hw = gy.dtype.type(w / 2.0)
    hh = gy.dtype.type(h / 2.0)
    for bi in range(b):
        a0 = gy.dtype.type(a[bi, 0])
        a1 = gy.dtype.type(a[bi, 1])
        a2 = gy.dtype.type(a[bi, 2])
        a3 = gy.dtype.type(a[bi, 3])
        a4 = gy.dtype.type(a[bi, 4])
        a5 = gy.dtype.type(a[bi, 5])
        for i in range(out_h):
            yn = two * (gy.dtype.type(i) + half) / gy.dtype.type(out_h) - one
            for j in range(out_w):
                xn = two * (gy.dtype.type(j) + half) / gy.dtype.type(out_w) - one
                sx = a0 * xn + a1 * yn + a2
                sy = a3 * xn + a4 * yn + a5
                px = (sx + one) * hw - half
                py = (sy + one) * hh - half
                x0 = int(np.floor(px))
                y0 = int(np.floor(py))
                fx = px - gy.dtype.type(x0)
                fy = py - gy.dtype.type(y0)
                w00 = (one - fy) * (one - fx)
                w01 = (one - fy) * fx
                w10 = fy * (one - fx)
                w11 = fy * fx
                for ch in range(c):
                    g = gy[bi, ch, i, j]
                    if 0 <= y0 < h and 0 <= x0 < w:
                        gimg[bi, ch, y0, x0] += w00 * g
                    if 0 <= y0 < h and 0 <= x0 + 1 < w:
                        gimg[bi, ch, y0, x0 + 1] += w01 * g
                    if 0 <= y0 + 1 < h and 0 <= x0 < w:
                        gimg[bi, ch, y0 + 1, x0] += w10 * g
                    if 0 <= y0 + 1 < h and 0 <= x0 + 1 < w:
                        gimg[bi, ch, y0 + 1, x0 + 1] += w11 * g
    return gimg
