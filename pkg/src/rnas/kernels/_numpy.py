"""Pure-numpy patch extraction kernels.

Columns use the layout (C*kh*kw, N*OH*OW): one row per (channel, kernel
offset), one column per output position.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def out_size(size, k, stride, pad):
    return (size + 2 * pad - k) // stride + 1


def im2col(x, kh, kw, stride, pad, pad_value=0.0):
    """Unfold ``x`` (N, C, H, W) into an array of shape (C*kh*kw, N*OH*OW)."""
    n, c, h, w = x.shape
    oh = out_size(h, kh, stride, pad)
    ow = out_size(w, kw, stride, pad)
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)), constant_values=pad_value)
    win = sliding_window_view(x, (kh, kw), axis=(2, 3))
    win = win[:, :, : (oh - 1) * stride + 1 : stride, : (ow - 1) * stride + 1 : stride]
    return np.ascontiguousarray(win.transpose(1, 4, 5, 0, 2, 3)).reshape(c * kh * kw, n * oh * ow)


def col2im(cols, x_shape, kh, kw, stride, pad):
    """Adjoint of :func:`im2col`: scatter-add columns back into an (N, C, H, W) array.

    Contributions to each pixel are summed in kernel-offset order, which the
    numba kernel reproduces exactly.
    """
    n, c, h, w = x_shape
    oh = out_size(h, kh, stride, pad)
    ow = out_size(w, kw, stride, pad)
    cols = cols.reshape(c, kh, kw, n, oh, ow)
    out = np.zeros((n, c, h + 2 * pad, w + 2 * pad), dtype=cols.dtype)
    for i in range(kh):
        for j in range(kw):
            out[:, :, i : i + (oh - 1) * stride + 1 : stride, j : j + (ow - 1) * stride + 1 : stride] += (
                cols[:, i, j].transpose(1, 0, 2, 3)
            )
    if pad:
        out = out[:, :, pad:-pad, pad:-pad]
    return np.ascontiguousarray(out)


def maxpool(x, k, stride, pad):
    """Window maxima of ``x`` plus the flat (H*W) index of each winner.

    Ties resolve to the first window position in row-major order.
    """
    n, c, h, w = x.shape
    oh = out_size(h, k, stride, pad)
    ow = out_size(w, k, stride, pad)
    cols = im2col(x.reshape(n * c, 1, h, w), k, k, stride, pad, -np.inf)
    best = cols.argmax(axis=0)
    out = cols[best, np.arange(cols.shape[1])].reshape(n, c, oh, ow)
    di, dj = np.divmod(best.reshape(n, c, oh, ow), k)
    y = np.arange(oh)[:, None] * stride - pad + di
    z = np.arange(ow)[None, :] * stride - pad + dj
    return out, (y * w + z).astype(np.int64)


def maxpool_backward(g, arg, x_shape):
    n, c, h, w = x_shape
    out = np.zeros((n * c, h * w), dtype=g.dtype)
    flat_arg = arg.reshape(n * c, -1)
    rows = np.repeat(np.arange(n * c), flat_arg.shape[1])
    np.add.at(out, (rows, flat_arg.ravel()), g.reshape(n * c, -1).ravel())
    return out.reshape(n, c, h, w)
