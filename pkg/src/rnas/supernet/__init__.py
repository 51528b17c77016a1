"""Cell-based differentiable search space."""

from .discrete import DiscreteNet, build_discrete_net, count_parameters, drop_path, inherit_weights
from .genotype import (
    Genotype,
    derive_genotype,
    genotype_from_text,
    genotype_to_text,
    load_genotype,
    save_genotype,
    saturated_alphas,
)
from .network import (
    MixedEdge,
    Supernet,
    SupernetConfig,
    edge_index,
    mixed_edge_forward,
    num_edges,
    reduction_cells,
)
from .ops import PRIMITIVES

__all__ = [
    "DiscreteNet",
    "Genotype",
    "MixedEdge",
    "PRIMITIVES",
    "Supernet",
    "SupernetConfig",
    "build_discrete_net",
    "count_parameters",
    "derive_genotype",
    "drop_path",
    "edge_index",
    "genotype_from_text",
    "genotype_to_text",
    "inherit_weights",
    "load_genotype",
    "mixed_edge_forward",
    "num_edges",
    "reduction_cells",
    "save_genotype",
    "saturated_alphas",
]
