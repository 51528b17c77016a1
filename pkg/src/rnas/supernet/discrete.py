"""Networks built from a fixed genotype.

Parameter names mirror :class:`Supernet` (``cells.<k>.edges.<e>.ops.<op>``),
so a discrete net can inherit the weights of the supernet it was derived from.
"""

import numpy as np

from ..autodiff import Linear, Module, Tensor
from ..autodiff import functional as F
from .network import Preprocess, Stem, edge_index, reduction_cells
from .ops import Skip, make_op


def drop_path(x, prob, rng):
    """Zero whole samples with probability ``prob``, rescaling survivors."""
    keep = 1.0 - prob
    mask = (rng.random((x.shape[0], 1, 1, 1)) < keep).astype(x.dtype) / np.asarray(keep, dtype=x.dtype)
    return x * Tensor(mask)


class ChosenEdge(Module):
    def __init__(self, op_name, channels, stride, rng):
        self.op_name = op_name
        self.ops = {op_name: make_op(op_name, channels, stride, rng)}

    def forward(self, x):
        return self.ops[self.op_name](x)


class DiscreteCell(Module):
    def __init__(self, genotype, c_pp, c_p, channels, reduction, reduction_prev, rng):
        self.reduction = reduction
        self.nodes = genotype.nodes
        self.preprocess = Preprocess(c_pp, c_p, channels, reduction_prev, rng)
        self.wiring = []
        self.edges = {}
        for node, src, op in genotype.edges(reduction):
            e = edge_index(node, src)
            stride = 2 if reduction and src < 2 else 1
            self.edges[e] = ChosenEdge(op, channels, stride, rng)
            self.wiring.append((node, src, e))

    def forward(self, s0, s1, drop_prob=0.0, rng=None):
        states = list(self.preprocess(s0, s1))
        for j in range(self.nodes):
            acc = None
            for node, src, e in self.wiring:
                if node != j:
                    continue
                edge = self.edges[e]
                h = edge(states[src])
                if drop_prob > 0 and not isinstance(edge.ops[edge.op_name], Skip):
                    h = drop_path(h, drop_prob, rng)
                acc = h if acc is None else acc + h
            states.append(acc)
        return F.concat(states[2:], axis=1)


class AuxHead(Module):
    """Secondary classifier on an intermediate feature map."""

    def __init__(self, channels, num_classes, rng):
        self.classifier = Linear(channels, num_classes, rng=rng)

    def forward(self, x):
        return self.classifier(F.global_avg_pool(F.relu(x)))


class DiscreteNet(Module):
    def __init__(self, genotype, cells=4, channels=8, num_classes=10, in_channels=3,
                 stem_multiplier=3, auxiliary=False, seed=0):
        rng = np.random.default_rng(seed)
        self.genotype = genotype
        self.in_channels = in_channels
        self.num_classes = num_classes
        self.drop_path_prob = 0.0
        self.drop_rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
        c_stem = stem_multiplier * channels
        self.stem = Stem(in_channels, c_stem, rng)
        c_pp, c_p, c_curr = c_stem, c_stem, channels
        reductions = reduction_cells(cells)
        self.aux_position = 2 * cells // 3 if auxiliary and cells >= 3 else None
        self.cells = []
        reduction_prev = False
        aux_channels = None
        for k in range(cells):
            reduction = k in reductions
            if reduction:
                c_curr *= 2
            self.cells.append(DiscreteCell(genotype, c_pp, c_p, c_curr, reduction, reduction_prev, rng))
            reduction_prev = reduction
            c_pp, c_p = c_p, genotype.nodes * c_curr
            if k == self.aux_position:
                aux_channels = c_p
        self.classifier = Linear(c_p, num_classes, rng=rng)
        self.aux_head = AuxHead(aux_channels, num_classes, rng) if aux_channels else None

    def forward(self, x, with_aux=False):
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.classifier.weight.dtype))
        drop = self.drop_path_prob if self.training else 0.0
        s0 = s1 = self.stem(x)
        aux = None
        for k, cell in enumerate(self.cells):
            s0, s1 = s1, cell(s0, s1, drop, self.drop_rng)
            if k == self.aux_position:
                aux = s1
        logits = self.classifier(F.global_avg_pool(s1))
        if with_aux:
            return logits, (self.aux_head(aux) if self.aux_head is not None and self.training else None)
        return logits


def build_discrete_net(genotype, cells=4, channels=8, num_classes=10, in_channels=3,
                       stem_multiplier=3, auxiliary=False, seed=0):
    return DiscreteNet(genotype, cells, channels, num_classes, in_channels, stem_multiplier, auxiliary, seed)


def inherit_weights(net, supernet):
    """Copy every same-named parameter from ``supernet`` into ``net``."""
    source = dict(supernet.named_parameters())
    for name, p in net.named_parameters():
        if name in source:
            p.data = source[name].data.astype(p.dtype, copy=True)
    return net


def count_parameters(net):
    """Parameter counts split by role; ``ops`` covers only edge operations."""
    counts = {"stem": 0, "preprocess": 0, "ops": 0, "classifier": 0, "aux": 0}
    for name, p in net.named_parameters():
        if name.startswith("alpha_"):
            continue
        if name.startswith("stem."):
            key = "stem"
        elif name.startswith("aux_head."):
            key = "aux"
        elif name.startswith("classifier."):
            key = "classifier"
        elif ".preprocess." in name:
            key = "preprocess"
        else:
            key = "ops"
        counts[key] += p.size
    counts["total"] = sum(counts.values())
    return counts
