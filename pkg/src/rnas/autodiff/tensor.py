"""Tensor type and the reverse-mode sweep.

Every differentiable op produces a :class:`Tensor` that remembers its
operands and a closure mapping the output gradient to operand gradients.
Nodes are stamped with a monotone creation index; the backward sweep visits
reachable nodes in exact reverse creation order, which is always a valid
reverse topological order.
"""

import itertools
import threading
from contextlib import contextmanager

import numpy as np

_counter = itertools.count()
_state = threading.local()

DEFAULT_DTYPE = np.float32


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested op."""


def grad_enabled():
    return getattr(_state, "enabled", True)


@contextmanager
def no_grad():
    """Disable graph recording on the current thread."""
    prev = grad_enabled()
    _state.enabled = False
    try:
        yield
    finally:
        _state.enabled = prev


def _as_array(data, dtype=None):
    if isinstance(data, Tensor):
        data = data.data
    if dtype is not None:
        return np.asarray(data).astype(dtype, copy=False)
    if isinstance(data, (np.ndarray, np.generic)) and data.dtype.kind == "f":
        return np.asarray(data)
    # python numbers and lists, or integer arrays
    return np.asarray(data, dtype=DEFAULT_DTYPE)


class Tensor:
    """An n-dimensional array that can take part in a differentiation graph.

    ``data`` is a numpy array (float32 unless constructed from a float array
    of another precision). Leaves created with ``requires_grad=True`` collect
    gradients in ``grad`` after :func:`backward`.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_id", "__weakref__")

    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, dtype=None):
        self.data = _as_array(data, dtype)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward = None
        self._id = next(_counter)

    @classmethod
    def _make(cls, data, parents, backward):
        """Wrap an op result, recording it in the graph when needed.

        ``backward(g, needs)`` returns one gradient (or None) per parent;
        ``needs[i]`` tells whether parent ``i`` wants one.
        """
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        out._id = next(_counter)
        if grad_enabled() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out.requires_grad = False
            out._parents = ()
            out._backward = None
        return out

    # array-like surface
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    @property
    def is_leaf(self):
        return not self._parents

    def numpy(self):
        return self.data

    def item(self):
        return self.data.item()

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __len__(self):
        return len(self.data)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{flag})"

    def backward(self):
        backward(self)

    # operator sugar; implementations live in functional
    def __add__(self, other):
        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return F.sub(self, other)

    def __rsub__(self, other):
        return F.sub(other, self)

    def __mul__(self, other):
        return F.mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return F.div(self, other)

    def __rtruediv__(self, other):
        return F.div(other, self)

    def __neg__(self):
        return F.neg(self)

    def __pow__(self, exponent):
        return F.power(self, exponent)

    def __matmul__(self, other):
        return F.matmul(self, other)

    def __getitem__(self, index):
        return F.getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return F.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return F.mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)

    def relu(self):
        return F.relu(self)


def constant(data, dtype=None):
    """A tensor that never accumulates gradient."""
    return Tensor(data, requires_grad=False, dtype=dtype)


def _reachable(root):
    seen = {}
    stack = [root]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen[id(t)] = t
        stack.extend(t._parents)
    return sorted(seen.values(), key=lambda t: t._id, reverse=True)


def _sweep(loss, wants):
    """Propagate d(loss) through the graph; returns {id(tensor): grad}."""
    nodes = _reachable(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    for node in nodes:
        g = grads.get(id(node))
        if g is None or node._backward is None:
            continue
        needs = tuple(wants(p) for p in node._parents)
        if not any(needs):
            continue
        pgrads = node._backward(g, needs)
        for p, pg, need in zip(node._parents, pgrads, needs):
            if not need or pg is None:
                continue
            key = id(p)
            prev = grads.get(key)
            grads[key] = pg if prev is None else prev + pg
    return nodes, grads


def _check_loss(loss):
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss is not connected to any tensor that requires grad")


def backward(loss):
    """Accumulate d(loss)/d(t) into ``t.grad`` for every reachable grad-requiring tensor."""
    _check_loss(loss)
    nodes, grads = _sweep(loss, lambda p: p.requires_grad)
    for node in nodes:
        g = grads.get(id(node))
        if g is None or not node.requires_grad:
            continue
        g = g.astype(node.data.dtype, copy=False)
        node.grad = g if node.grad is None else node.grad + g


def grad(loss, inputs):
    """Return d(loss)/d(input) arrays without touching any ``.grad`` field.

    Only the part of the graph that leads to ``inputs`` is differentiated, so
    e.g. gradients w.r.t. an input image skip all weight-gradient work.
    """
    _check_loss(loss)
    inputs = list(inputs)
    targets = {id(t) for t in inputs}
    leads = {}
    for node in reversed(_reachable(loss)):
        leads[id(node)] = id(node) in targets or any(leads[id(p)] for p in node._parents)
    _, grads = _sweep(loss, lambda p: leads.get(id(p), False))
    out = []
    for t in inputs:
        g = grads.get(id(t))
        out.append(np.zeros_like(t.data) if g is None else g.astype(t.data.dtype, copy=False))
    return out


from . import functional as F  # noqa: E402
