"""Candidate operations on a cell edge.

Reduced DARTS op set: separable and dilated convolutions are replaced by
plain ReLU-conv-BN blocks. Every op maps C channels to C channels; with
stride 2 the spatial size becomes ceil(H / 2).
"""

import numpy as np

from ..autodiff import Module, ReLUConvBN, Tensor
from ..autodiff import functional as F

PRIMITIVES = ("none", "skip_connect", "conv_3x3", "conv_5x5", "avg_pool_3x3", "max_pool_3x3")


class Zero(Module):
    def __init__(self, stride):
        self.stride = stride

    def forward(self, x):
        n, c, h, w = x.shape
        s = self.stride
        return Tensor(np.zeros((n, c, -(-h // s), -(-w // s)), dtype=x.dtype))


class Skip(Module):
    """Identity, or parameter-free 2x subsampling when strided."""

    def __init__(self, stride):
        self.stride = stride

    def forward(self, x):
        if self.stride == 1:
            return x
        return F.avg_pool2d(x, 1, self.stride)


class Pool(Module):
    def __init__(self, kind, stride):
        self.fn = F.avg_pool2d if kind == "avg" else F.max_pool2d
        self.stride = stride

    def forward(self, x):
        return self.fn(x, 3, self.stride, 1)


def make_op(name, channels, stride, rng):
    if name == "none":
        return Zero(stride)
    if name == "skip_connect":
        return Skip(stride)
    if name == "conv_3x3":
        return ReLUConvBN(channels, channels, 3, stride, 1, rng=rng)
    if name == "conv_5x5":
        return ReLUConvBN(channels, channels, 5, stride, 2, rng=rng)
    if name == "avg_pool_3x3":
        return Pool("avg", stride)
    if name == "max_pool_3x3":
        return Pool("max", stride)
    raise ValueError(f"unknown operation {name!r}; choose from {PRIMITIVES}")


def check_op_names(op_names):
    op_names = tuple(op_names)
    bad = [n for n in op_names if n not in PRIMITIVES]
    if bad:
        raise ValueError(f"unknown operations {bad}; choose from {PRIMITIVES}")
    if len(set(op_names)) != len(op_names):
        raise ValueError(f"duplicate operations in {op_names}")
    if not any(n != "none" for n in op_names):
        raise ValueError("op set needs at least one non-zero operation")
    return op_names
