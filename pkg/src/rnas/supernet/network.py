"""The over-parameterized search network and its mixed edges."""

from dataclasses import dataclass

import numpy as np

from ..autodiff import Conv2d, Linear, Module, Parameter, ReLUConvBN, ShapeError, Tensor
from ..autodiff import functional as F
from .ops import PRIMITIVES, check_op_names, make_op


@dataclass
class SupernetConfig:
    in_channels: int = 3
    num_classes: int = 10
    channels: int = 8
    cells: int = 4
    nodes: int = 3
    stem_multiplier: int = 3
    op_names: tuple = PRIMITIVES

    def __post_init__(self):
        self.op_names = check_op_names(self.op_names)
        for name in ("in_channels", "num_classes", "channels", "cells", "nodes", "stem_multiplier"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def num_edges(self):
        return num_edges(self.nodes)


def num_edges(nodes):
    return sum(2 + j for j in range(nodes))


def edge_index(node, source):
    """Row of the (node, source) edge in an architecture matrix; ``node`` counts from 0."""
    return sum(2 + j for j in range(node)) + source


def reduction_cells(cells):
    if cells < 3:
        return set()
    return {cells // 3, 2 * cells // 3}


def mixed_edge_forward(x, edge_alphas, ops):
    """Softmax(edge_alphas)-weighted sum of every candidate op applied to ``x``.

    ``ops`` is a sequence of (name, module) aligned with ``edge_alphas``.
    The zero op contributes nothing to the sum but still takes part in the
    softmax normalization.
    """
    if not isinstance(edge_alphas, Tensor):
        edge_alphas = Tensor(np.asarray(edge_alphas, dtype=x.dtype))
    if edge_alphas.shape != (len(ops),):
        raise ShapeError(f"edge alphas shape {edge_alphas.shape} does not match {len(ops)} ops")
    if not np.all(np.isfinite(edge_alphas.data)):
        raise ValueError("architecture weights contain NaN or inf")
    weights = F.softmax(edge_alphas)
    out = None
    rectified = None
    for i, (name, op) in enumerate(ops):
        if name == "none":
            continue
        if isinstance(op, ReLUConvBN):
            # conv candidates share one ReLU of the edge input
            if rectified is None:
                rectified = F.relu(x)
            y = op.after_relu(rectified)
        else:
            y = op(x)
        term = weights[i] * y
        out = term if out is None else out + term
    return out


class MixedEdge(Module):
    def __init__(self, channels, stride, op_names, rng):
        self.op_names = tuple(op_names)
        self.ops = {name: make_op(name, channels, stride, rng) for name in self.op_names}

    def forward(self, x, edge_alphas):
        return mixed_edge_forward(x, edge_alphas, [(n, self.ops[n]) for n in self.op_names])


class Preprocess(Module):
    """Brings the two cell inputs to ``channels`` and a common resolution."""

    def __init__(self, c_pp, c_p, channels, reduction_prev, rng):
        self.pre0 = ReLUConvBN(c_pp, channels, 1, 2 if reduction_prev else 1, 0, rng=rng)
        self.pre1 = ReLUConvBN(c_p, channels, 1, 1, 0, rng=rng)

    def forward(self, s0, s1):
        return self.pre0(s0), self.pre1(s1)


class SearchCell(Module):
    def __init__(self, nodes, c_pp, c_p, channels, reduction, reduction_prev, op_names, rng):
        self.nodes = nodes
        self.reduction = reduction
        self.preprocess = Preprocess(c_pp, c_p, channels, reduction_prev, rng)
        self.edges = []
        for j in range(nodes):
            for i in range(2 + j):
                stride = 2 if reduction and i < 2 else 1
                self.edges.append(MixedEdge(channels, stride, op_names, rng))

    def forward(self, s0, s1, alphas):
        states = list(self.preprocess(s0, s1))
        e = 0
        for j in range(self.nodes):
            acc = None
            for i in range(2 + j):
                h = self.edges[e](states[i], alphas[e])
                acc = h if acc is None else acc + h
                e += 1
            states.append(acc)
        return F.concat(states[2:], axis=1)


class Stem(Module):
    def __init__(self, c_in, c_out, rng):
        self.conv = Conv2d(c_in, c_out, 3, 1, 1, rng=rng)

    def forward(self, x):
        return F.batch_norm(self.conv(x))


class Supernet(Module):
    """Cell-based supernet holding network weights and architecture matrices.

    ``alpha_normal`` and ``alpha_reduce`` have shape (edges, len(op_names)).
    """

    def __init__(self, config=None, seed=0):
        config = config or SupernetConfig()
        self.config = config
        rng = np.random.default_rng(seed)
        c = config.channels
        c_stem = config.stem_multiplier * c
        self.stem = Stem(config.in_channels, c_stem, rng)
        c_pp, c_p, c_curr = c_stem, c_stem, c
        reductions = reduction_cells(config.cells)
        self.cells = []
        reduction_prev = False
        for k in range(config.cells):
            reduction = k in reductions
            if reduction:
                c_curr *= 2
            self.cells.append(
                SearchCell(config.nodes, c_pp, c_p, c_curr, reduction, reduction_prev, config.op_names, rng)
            )
            reduction_prev = reduction
            c_pp, c_p = c_p, config.nodes * c_curr
        self.classifier = Linear(c_p, config.num_classes, rng=rng)
        shape = (config.num_edges, len(config.op_names))
        self.alpha_normal = Parameter(1e-3 * rng.standard_normal(shape))
        self.alpha_reduce = Parameter(1e-3 * rng.standard_normal(shape))

    def arch_parameters(self):
        return [self.alpha_normal, self.alpha_reduce]

    def weights(self):
        arch = {id(a) for a in self.arch_parameters()}
        return [p for p in self.parameters() if id(p) not in arch]

    def named_weights(self):
        arch = {id(a) for a in self.arch_parameters()}
        return [(n, p) for n, p in self.named_parameters() if id(p) not in arch]

    def forward(self, x):
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.alpha_normal.dtype))
        if x.ndim != 4 or x.shape[1] != self.config.in_channels:
            raise ShapeError(f"expected input (batch, {self.config.in_channels}, H, W), got {x.shape}")
        s0 = s1 = self.stem(x)
        for cell in self.cells:
            alphas = self.alpha_reduce if cell.reduction else self.alpha_normal
            s0, s1 = s1, cell(s0, s1, alphas)
        return self.classifier(F.global_avg_pool(s1))
