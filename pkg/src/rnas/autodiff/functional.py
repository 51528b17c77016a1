"""Differentiable primitives.

Each op computes its forward value with numpy and registers a closure that
maps the output gradient to operand gradients. Convolution and pooling go
through the patch kernels in :mod:`rnas.kernels`.
"""

import numbers

import numpy as np

from .. import kernels
from .tensor import ShapeError, Tensor


def _wrap(x, like=None):
    if isinstance(x, Tensor):
        return x
    if isinstance(x, numbers.Number) and like is not None:
        return Tensor(np.asarray(x, dtype=like.dtype))
    return Tensor(x)


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, _wrap(b, a)
    b = _wrap(b)
    return _wrap(a, b), b


def unbroadcast(g, shape):
    """Sum ``g`` down to ``shape``, undoing numpy broadcasting."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(op, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# elementwise arithmetic

def add(a, b):
    a, b = _pair(a, b)
    _broadcast_shape("add", a, b)

    def back(g, needs):
        return (unbroadcast(g, a.shape) if needs[0] else None,
                unbroadcast(g, b.shape) if needs[1] else None)

    return Tensor._make(a.data + b.data, (a, b), back)


def sub(a, b):
    a, b = _pair(a, b)
    _broadcast_shape("sub", a, b)

    def back(g, needs):
        return (unbroadcast(g, a.shape) if needs[0] else None,
                unbroadcast(-g, b.shape) if needs[1] else None)

    return Tensor._make(a.data - b.data, (a, b), back)


def mul(a, b):
    a, b = _pair(a, b)
    _broadcast_shape("mul", a, b)
    ad, bd = a.data, b.data

    def back(g, needs):
        return (unbroadcast(g * bd, a.shape) if needs[0] else None,
                unbroadcast(g * ad, b.shape) if needs[1] else None)

    return Tensor._make(ad * bd, (a, b), back)


def div(a, b):
    a, b = _pair(a, b)
    _broadcast_shape("div", a, b)
    ad, bd = a.data, b.data

    def back(g, needs):
        return (unbroadcast(g / bd, a.shape) if needs[0] else None,
                unbroadcast(-g * ad / (bd * bd), b.shape) if needs[1] else None)

    return Tensor._make(ad / bd, (a, b), back)


def neg(a):
    a = _wrap(a)
    return Tensor._make(-a.data, (a,), lambda g, needs: (-g,))


def power(a, exponent):
    """``a ** exponent`` for a constant real exponent."""
    a = _wrap(a)
    if isinstance(exponent, Tensor):
        raise TypeError("power only supports a constant exponent")
    ad = a.data
    out = ad ** exponent

    def back(g, needs):
        return (g * (exponent * ad ** (exponent - 1)),)

    return Tensor._make(out, (a,), back)


def sqrt(a):
    a = _wrap(a)
    out = np.sqrt(a.data)
    return Tensor._make(out, (a,), lambda g, needs: (g * 0.5 / out,))


def exp(a):
    a = _wrap(a)
    out = np.exp(a.data)
    return Tensor._make(out, (a,), lambda g, needs: (g * out,))


def log(a):
    a = _wrap(a)
    ad = a.data
    return Tensor._make(np.log(ad), (a,), lambda g, needs: (g / ad,))


def relu(a):
    a = _wrap(a)
    mask = a.data > 0
    return Tensor._make(np.maximum(a.data, 0), (a,), lambda g, needs: (g * mask,))


def sign(a):
    """Elementwise sign; its derivative is zero almost everywhere."""
    a = _wrap(a)
    return Tensor._make(np.sign(a.data), (a,), lambda g, needs: (np.zeros_like(g),))


def clamp(a, lo=None, hi=None):
    a = _wrap(a)
    ad = a.data
    out = np.clip(ad, lo, hi)
    mask = np.ones(ad.shape, dtype=bool)
    if lo is not None:
        mask &= ad >= lo
    if hi is not None:
        mask &= ad <= hi
    return Tensor._make(out.astype(a.dtype, copy=False), (a,), lambda g, needs: (g * mask,))


# linear algebra and shape

def matmul(a, b):
    a, b = _pair(a, b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data

    def back(g, needs):
        return (g @ bd.T if needs[0] else None, ad.T @ g if needs[1] else None)

    return Tensor._make(ad @ bd, (a, b), back)


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` with weight shaped (out, in)."""
    out = matmul(x, transpose(weight))
    return out if bias is None else add(out, bias)


def reshape(a, shape):
    a = _wrap(a)
    src = a.shape
    try:
        out = a.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: cannot reshape {src} into {tuple(shape)}") from None
    return Tensor._make(out, (a,), lambda g, needs: (g.reshape(src),))


def flatten(a):
    return reshape(a, (a.shape[0], -1))


def transpose(a, axes=None):
    a = _wrap(a)
    inv = None if axes is None else tuple(np.argsort(axes))
    return Tensor._make(a.data.transpose(axes), (a,), lambda g, needs: (g.transpose(inv),))


def getitem(a, index):
    a = _wrap(a)
    if isinstance(index, Tensor):
        index = index.data
    src, dtype = a.shape, a.dtype

    def back(g, needs):
        out = np.zeros(src, dtype=dtype)
        np.add.at(out, index, g)
        return (out,)

    return Tensor._make(np.asarray(a.data[index]), (a,), back)


def concat(tensors, axis=0):
    tensors = [_wrap(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise ShapeError(f"concat: incompatible shapes {shapes} along axis {axis}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def back(g, needs):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._make(out, tuple(tensors), back)


# reductions

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum(a, axis=None, keepdims=False):  # noqa: A001
    a = _wrap(a)
    axes = _norm_axis(axis, a.ndim)
    src = a.shape

    def back(g, needs):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, src).copy(),)

    return Tensor._make(np.asarray(a.data.sum(axis=axes, keepdims=keepdims)), (a,), back)


def mean(a, axis=None, keepdims=False):
    a = _wrap(a)
    axes = _norm_axis(axis, a.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes]))
    src = a.shape

    def back(g, needs):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g / count, src).copy(),)

    return Tensor._make(np.asarray(a.data.mean(axis=axes, keepdims=keepdims)), (a,), back)


# probability

def _softmax(x, axis):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(a, axis=-1):
    a = _wrap(a)
    s = _softmax(a.data, axis)

    def back(g, needs):
        return (s * (g - (g * s).sum(axis=axis, keepdims=True)),)

    return Tensor._make(s, (a,), back)


def log_softmax(a, axis=-1):
    a = _wrap(a)
    z = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    s = np.exp(out)

    def back(g, needs):
        return (g - s * g.sum(axis=axis, keepdims=True),)

    return Tensor._make(out, (a,), back)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of ``labels`` under softmax(``logits``)."""
    logits = _wrap(logits)
    labels = np.asarray(labels.data if isinstance(labels, Tensor) else labels).astype(np.int64)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy: logits must be (batch, classes), got {logits.shape}")
    b, k = logits.shape
    if labels.shape != (b,):
        raise ShapeError(f"cross_entropy: labels shape {labels.shape} does not match logits {logits.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise ValueError(f"cross_entropy: labels must lie in [0, {k}), got range [{labels.min()}, {labels.max()}]")
    x = logits.data
    z = x - x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    rows = np.arange(b)
    loss = -logp[rows, labels].mean()

    def back(g, needs):
        d = np.exp(logp)
        d[rows, labels] -= 1
        return (d * (g / b),)

    return Tensor._make(np.asarray(loss, dtype=x.dtype), (logits,), back)


# convolution, pooling, normalization

def conv2d(x, weight, bias=None, stride=1, padding=0):
    """2-D cross-correlation of (N, C, H, W) input with (O, C, kh, kw) weights."""
    x, weight = _wrap(x), _wrap(weight)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise ShapeError(f"conv2d: input {x.shape} incompatible with weight {weight.shape}")
    n, _, h, w = x.shape
    oc, _, kh, kw = weight.shape
    oh = kernels.out_size(h, kh, stride, padding)
    ow = kernels.out_size(w, kw, stride, padding)
    if oh < 1 or ow < 1:
        raise ShapeError(f"conv2d: input {x.shape} too small for weight {weight.shape}")
    cols = kernels.im2col(x.data, kh, kw, stride, padding)
    wmat = weight.data.reshape(oc, -1)
    out = (wmat @ cols).reshape(oc, n, oh, ow).transpose(1, 0, 2, 3)
    if bias is not None:
        out = out + bias.data.reshape(1, oc, 1, 1)
    out = np.ascontiguousarray(out)
    xshape, wshape = x.shape, weight.shape

    def back(g, needs):
        gt = g.transpose(1, 0, 2, 3).reshape(oc, -1)
        dx = kernels.col2im(wmat.T @ gt, xshape, kh, kw, stride, padding) if needs[0] else None
        dw = (gt @ cols.T).reshape(wshape) if needs[1] else None
        if bias is None:
            return dx, dw
        return dx, dw, (g.sum(axis=(0, 2, 3)) if needs[2] else None)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._make(out, parents, back)


def _pool_cols(x, k, stride, padding, pad_value):
    n, c, h, w = x.shape
    oh = kernels.out_size(h, k, stride, padding)
    ow = kernels.out_size(w, k, stride, padding)
    if oh < 1 or ow < 1:
        raise ShapeError(f"pool: input {x.shape} too small for window {k}")
    cols = kernels.im2col(x.data.reshape(n * c, 1, h, w), k, k, stride, padding, pad_value)
    return cols, (n, c, oh, ow)


def avg_pool2d(x, kernel_size, stride=None, padding=0):
    """Average pooling; zero padding counts toward the window mean."""
    x = _wrap(x)
    stride = stride or kernel_size
    cols, oshape = _pool_cols(x, kernel_size, stride, padding, 0.0)
    n, c, h, w = x.shape
    area = kernel_size * kernel_size
    out = cols.mean(axis=0).reshape(oshape)

    def back(g, needs):
        d = np.broadcast_to(g.reshape(1, -1) / area, cols.shape)
        return (kernels.col2im(d, (n * c, 1, h, w), kernel_size, kernel_size, stride, padding).reshape(n, c, h, w),)

    return Tensor._make(out, (x,), back)


def max_pool2d(x, kernel_size, stride=None, padding=0):
    x = _wrap(x)
    stride = stride or kernel_size
    if kernels.out_size(min(x.shape[2:]), kernel_size, stride, padding) < 1:
        raise ShapeError(f"pool: input {x.shape} too small for window {kernel_size}")
    out, arg = kernels.maxpool(x.data, kernel_size, stride, padding)
    xshape = x.shape
    return Tensor._make(out, (x,), lambda g, needs: (kernels.maxpool_backward(g, arg, xshape),))


def global_avg_pool(x):
    return mean(x, axis=(2, 3))


def batch_norm(x, eps=1e-5):
    """Normalize with the current batch's per-channel mean and variance.

    No running statistics and no affine transform. Accepts (N, C) or
    (N, C, H, W) input.
    """
    x = _wrap(x)
    if x.ndim not in (2, 4):
        raise ShapeError(f"batch_norm: expected 2-D or 4-D input, got {x.shape}")
    axes = (0,) if x.ndim == 2 else (0, 2, 3)
    xd = x.data
    mu = xd.mean(axis=axes, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    count = xd.size // xd.shape[1]

    def back(g, needs):
        gs = g.sum(axis=axes, keepdims=True)
        gx = (g * xhat).sum(axis=axes, keepdims=True)
        return ((inv / count) * (count * g - gs - xhat * gx),)

    return Tensor._make(xhat.astype(xd.dtype, copy=False), (x,), back)
