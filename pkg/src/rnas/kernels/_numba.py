"""Numba-compiled patch extraction kernels; same contracts as ``_numpy``."""

import numpy as np
from numba import njit

from ._numpy import out_size


@njit(cache=True)
def _im2col(x, kh, kw, stride, pad, pad_value, oh, ow):
    n, c, h, w = x.shape
    cols = np.empty((c * kh * kw, n * oh * ow), dtype=x.dtype)
    fill = x.dtype.type(pad_value)
    for ch in range(c):
        for i in range(kh):
            for j in range(kw):
                row = (ch * kh + i) * kw + j
                for b in range(n):
                    for p in range(oh):
                        y = p * stride + i - pad
                        base = (b * oh + p) * ow
                        if y < 0 or y >= h:
                            for q in range(ow):
                                cols[row, base + q] = fill
                            continue
                        for q in range(ow):
                            z = q * stride + j - pad
                            if 0 <= z < w:
                                cols[row, base + q] = x[b, ch, y, z]
                            else:
                                cols[row, base + q] = fill
    return cols


@njit(cache=True)
def _col2im(cols, n, c, h, w, kh, kw, stride, pad, oh, ow):
    out = np.zeros((n, c, h, w), dtype=cols.dtype)
    # kernel-offset-major so each pixel sums in the same order as the numpy path
    for i in range(kh):
        for j in range(kw):
            for ch in range(c):
                row = (ch * kh + i) * kw + j
                for b in range(n):
                    for p in range(oh):
                        y = p * stride + i - pad
                        if y < 0 or y >= h:
                            continue
                        base = (b * oh + p) * ow
                        for q in range(ow):
                            z = q * stride + j - pad
                            if 0 <= z < w:
                                out[b, ch, y, z] += cols[row, base + q]
    return out


def im2col(x, kh, kw, stride, pad, pad_value=0.0):
    _, _, h, w = x.shape
    oh = out_size(h, kh, stride, pad)
    ow = out_size(w, kw, stride, pad)
    return _im2col(np.ascontiguousarray(x), kh, kw, stride, pad, float(pad_value), oh, ow)


def col2im(cols, x_shape, kh, kw, stride, pad):
    n, c, h, w = x_shape
    oh = out_size(h, kh, stride, pad)
    ow = out_size(w, kw, stride, pad)
    return _col2im(np.ascontiguousarray(cols), n, c, h, w, kh, kw, stride, pad, oh, ow)


@njit(cache=True)
def _maxpool(x, k, stride, pad, oh, ow):
    n, c, h, w = x.shape
    out = np.empty((n, c, oh, ow), dtype=x.dtype)
    arg = np.empty((n, c, oh, ow), dtype=np.int64)
    for b in range(n):
        for ch in range(c):
            for p in range(oh):
                for q in range(ow):
                    best = -np.inf
                    where = -1
                    for i in range(k):
                        y = p * stride + i - pad
                        if y < 0 or y >= h:
                            continue
                        for j in range(k):
                            z = q * stride + j - pad
                            if 0 <= z < w:
                                v = x[b, ch, y, z]
                                if where < 0 or v > best:
                                    best = v
                                    where = y * w + z
                    out[b, ch, p, q] = best
                    arg[b, ch, p, q] = where
    return out, arg


@njit(cache=True)
def _maxpool_backward(g, arg, n, c, h, w):
    out = np.zeros((n, c, h * w), dtype=g.dtype)
    oh, ow = g.shape[2], g.shape[3]
    for b in range(n):
        for ch in range(c):
            for p in range(oh):
                for q in range(ow):
                    out[b, ch, arg[b, ch, p, q]] += g[b, ch, p, q]
    return out.reshape(n, c, h, w)


def maxpool(x, k, stride, pad):
    _, _, h, w = x.shape
    return _maxpool(np.ascontiguousarray(x), k, stride, pad, out_size(h, k, stride, pad), out_size(w, k, stride, pad))


def maxpool_backward(g, arg, x_shape):
    n, c, h, w = x_shape
    return _maxpool_backward(np.ascontiguousarray(g), arg, n, c, h, w)
