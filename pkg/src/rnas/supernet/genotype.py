"""Discrete architectures: derivation from architecture weights and text I/O."""

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .network import edge_index, num_edges
from .ops import PRIMITIVES


@dataclass(frozen=True)
class Genotype:
    """Chosen (op, source) pairs, two per intermediate node, for both cell types.

    Sources 0 and 1 are the cell inputs; source ``k >= 2`` is intermediate
    node ``k - 2``.
    """

    normal: tuple
    reduce: tuple

    def __post_init__(self):
        object.__setattr__(self, "normal", tuple((str(o), int(i)) for o, i in self.normal))
        object.__setattr__(self, "reduce", tuple((str(o), int(i)) for o, i in self.reduce))
        validate(self)

    @property
    def nodes(self):
        return len(self.normal) // 2

    def cell(self, reduction):
        return self.reduce if reduction else self.normal

    def edges(self, reduction):
        """Yield (node, source, op) for one cell type."""
        pairs = self.cell(reduction)
        for k, (op, src) in enumerate(pairs):
            yield k // 2, src, op


def validate(g):
    if len(g.normal) != len(g.reduce) or len(g.normal) % 2 or not g.normal:
        raise ValueError("genotype needs exactly two inputs per node and matching cell sizes")
    for label, pairs in (("normal", g.normal), ("reduce", g.reduce)):
        for k in range(0, len(pairs), 2):
            node = k // 2
            (op_a, src_a), (op_b, src_b) = pairs[k], pairs[k + 1]
            for op, src in ((op_a, src_a), (op_b, src_b)):
                if op == "none" or op not in PRIMITIVES:
                    raise ValueError(f"{label} node {node + 2}: invalid op {op!r}")
                if not 0 <= src < node + 2:
                    raise ValueError(f"{label} node {node + 2}: source {src} is not an earlier node")
            if src_a == src_b:
                raise ValueError(f"{label} node {node + 2}: both inputs come from node {src_a}")


def _softmax64(a):
    a = np.asarray(a, dtype=np.float64)
    z = np.exp(a - a.max(axis=-1, keepdims=True))
    return z / z.sum(axis=-1, keepdims=True)


def _derive_cell(alpha, op_names, nodes):
    probs = _softmax64(alpha)
    usable = [k for k, name in enumerate(op_names) if name != "none"]
    pairs = []
    for j in range(nodes):
        scored = []
        for src in range(2 + j):
            row = probs[edge_index(j, src)]
            best = max(usable, key=lambda k: (row[k], -k))
            scored.append((-row[best], src, best))
        scored.sort()
        chosen = sorted(scored[:2], key=lambda t: t[1])
        pairs.extend((op_names[best], src) for _, src, best in chosen)
    return pairs


def derive_genotype(alpha_normal, alpha_reduce, op_names, nodes=None):
    """Keep, per node, the two incoming edges whose strongest non-zero op weighs most.

    Ties go to the lowest edge index, then the lowest op index.
    """
    alpha_normal = np.asarray(getattr(alpha_normal, "data", alpha_normal))
    alpha_reduce = np.asarray(getattr(alpha_reduce, "data", alpha_reduce))
    if not (np.all(np.isfinite(alpha_normal)) and np.all(np.isfinite(alpha_reduce))):
        raise ValueError("architecture weights must be finite")
    op_names = tuple(op_names)
    if nodes is None:
        nodes = next(n for n in range(1, 64) if num_edges(n) == alpha_normal.shape[0])
    return Genotype(_derive_cell(alpha_normal, op_names, nodes), _derive_cell(alpha_reduce, op_names, nodes))


def saturated_alphas(genotype, op_names, magnitude=50.0):
    """Architecture matrices that put (almost) all softmax mass on ``genotype``.

    Unchosen edges saturate on the zero op, so ``op_names`` must contain it.
    """
    op_names = tuple(op_names)
    if "none" not in op_names:
        raise ValueError("saturating unchosen edges needs the 'none' op")
    out = []
    for reduction in (False, True):
        a = np.zeros((num_edges(genotype.nodes), len(op_names)))
        a[:, op_names.index("none")] = magnitude
        for node, src, op in genotype.edges(reduction):
            row = edge_index(node, src)
            a[row] = 0.0
            a[row, op_names.index(op)] = magnitude
        out.append(a)
    return out[0], out[1]


HEADER = "# rnas genotype v1: <cell> <node> <input> <op>"


def genotype_to_text(g):
    lines = [HEADER]
    for label, reduction in (("normal", False), ("reduce", True)):
        for node, src, op in g.edges(reduction):
            lines.append(f"{label} {node + 2} {src} {op}")
    return "\n".join(lines) + "\n"


def genotype_from_text(text):
    cells = {"normal": {}, "reduce": {}}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4 or parts[0] not in cells:
            raise ValueError(f"line {lineno}: expected '<normal|reduce> <node> <input> <op>', got {raw!r}")
        label, node, src, op = parts[0], int(parts[1]), int(parts[2]), parts[3]
        cells[label].setdefault(node, []).append((op, src))
    flat = {}
    for label, by_node in cells.items():
        if sorted(by_node) != list(range(2, 2 + len(by_node))):
            raise ValueError(f"{label}: node indices must be 2..n without gaps, got {sorted(by_node)}")
        flat[label] = [pair for node in sorted(by_node) for pair in by_node[node]]
    return Genotype(flat["normal"], flat["reduce"])


def save_genotype(g, path):
    Path(path).write_text(genotype_to_text(g))


def load_genotype(path):
    return genotype_from_text(Path(path).read_text())
