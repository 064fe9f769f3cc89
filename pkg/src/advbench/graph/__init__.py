from importlib import import_module

from .sparse import GraphError, SparseSym, normalize_adj, normalize_adj_tensor

# Resolved lazily: data.graphs imports graph.sparse, and the modules below import data.graphs.
_LAZY = {
    "GCN": "gcn", "LossSpec": "gcn", "input_gradients": "gcn",
    "GraphBudget": "perturbed", "PerturbedGraph": "perturbed", "TargetSpec": "perturbed", "apply_flips": "perturbed",
    "project_capped_box": "projection",
    "attack_succeeded": "targeted", "fga": "targeted", "ig_attack": "targeted", "integrated_gradients": "targeted",
    "nettack": "targeted", "rnd": "targeted",
    "dice": "untargeted", "meta_gradient": "untargeted", "metattack": "untargeted",
    "minmax_topology_attack": "untargeted", "pgd_topology_attack": "untargeted",
    "GCNJaccard": "defenses", "GCNSVD": "defenses", "eigh_jacobi": "defenses", "graph_adversarial_train": "defenses",
    "jaccard_filter": "defenses", "jaccard_similarity": "defenses", "svd_low_rank": "defenses",
}

__all__ = sorted(["GraphError", "SparseSym", "normalize_adj", "normalize_adj_tensor", *_LAZY])


def __getattr__(name):
    if name in _LAZY:
        return getattr(import_module(f".{_LAZY[name]}", __name__), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
