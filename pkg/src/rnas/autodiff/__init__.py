"""Minimal reverse-mode automatic differentiation on numpy arrays."""

from . import functional
from .nn import Conv2d, Linear, Module, Parameter, ReLUConvBN
from .optim import SGD, Adam, clip_grad_norm, cosine_lr
from .tensor import ShapeError, Tensor, backward, constant, grad, grad_enabled, no_grad

__all__ = [
    "Adam",
    "Conv2d",
    "Linear",
    "Module",
    "Parameter",
    "ReLUConvBN",
    "SGD",
    "ShapeError",
    "Tensor",
    "backward",
    "clip_grad_norm",
    "constant",
    "cosine_lr",
    "functional",
    "grad",
    "grad_enabled",
    "no_grad",
]
