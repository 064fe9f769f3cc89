"""Shared graph-attack records: budgets, targets, perturbed graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data.graphs import GraphDataset, save_graph
from .sparse import GraphError, SparseSym


@dataclass(frozen=True)
class GraphBudget:
    max_flips: int = 1
    allow_feature_flips: bool = False
    feature_budget: int = 0

    def __post_init__(self):
        if int(self.max_flips) < 0 or int(self.feature_budget) < 0:
            raise ValueError(f"budgets must be >= 0, got {self.max_flips}, {self.feature_budget}")

    @classmethod
    def fraction_of_edges(cls, graph, fraction: float = 0.05) -> "GraphBudget":
        """``int(fraction * edges)``, the usual poisoning budget."""
        return cls(int(fraction * graph.adj.n_edges))


@dataclass(frozen=True)
class TargetSpec:
    node: int
    label: int
    loss: str = "cw"

    @classmethod
    def for_node(cls, graph, node: int, loss: str = "cw") -> "TargetSpec":
        return cls(int(node), int(graph.labels[node]), loss)


@dataclass
class PerturbedGraph:
    """Result of a graph attack or filter.

    ``flips`` holds ``(i, j, +1)`` for insertions and ``(i, j, -1)`` for
    deletions with ``i < j``; ``feature_flips`` holds ``(node, feature, ±1)``.
    """

    graph: GraphDataset
    flips: list = field(default_factory=list)
    feature_flips: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    shortfall: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def adj(self) -> SparseSym:
        return self.graph.adj

    @property
    def n_flips(self) -> int:
        return len(self.flips)

    def validate(self, clean: GraphDataset, max_flips: int | None = None, max_feature_flips: int | None = None) -> None:
        """Check the flip log against the clean graph and the budget."""
        pairs = [(int(i), int(j)) for i, j, _ in self.flips]
        if len(set(pairs)) != len(pairs):
            raise GraphError("flip list repeats a pair")
        for i, j, s in self.flips:
            if not i < j:
                raise GraphError(f"flip ({i}, {j}) is not an upper-triangle pair")
            if s != (-1 if clean.adj.has_edge(i, j) else 1):
                raise GraphError(f"flip ({i}, {j}) has the wrong sign {s}")
        if clean.adj.flip(pairs) != self.adj:
            raise GraphError("flip list does not reproduce the perturbed adjacency")
        if max_flips is not None and len(pairs) > max_flips:
            raise GraphError(f"{len(pairs)} flips exceed the budget {max_flips}")
        if max_feature_flips is not None and len(self.feature_flips) > max_feature_flips:
            raise GraphError(f"{len(self.feature_flips)} feature flips exceed the budget {max_feature_flips}")
        if not np.all((self.graph.features == 0) | (self.graph.features == 1)) and self.feature_flips:
            raise GraphError("feature flips produced non-binary features")

    def save(self, directory):
        """Shared graph format plus a provenance block listing the flips."""
        prov = dict(self.provenance)
        prov["flips"] = [[int(i), int(j), int(s)] for i, j, s in self.flips]
        prov["feature_flips"] = [[int(i), int(f), int(s)] for i, f, s in self.feature_flips]
        prov["shortfall"] = int(self.shortfall)
        return save_graph(self.graph, directory, prov)


def flip_sign(adj: SparseSym, i: int, j: int) -> int:
    return -1 if adj.has_edge(i, j) else 1


def apply_flips(clean: GraphDataset, flips, feature_flips=(), **provenance) -> GraphDataset:
    adj = clean.adj.flip([(i, j) for i, j, _ in flips])
    g = clean.with_adj(adj)
    if feature_flips:
        X = clean.features.copy()
        for u, f, _ in feature_flips:
            X[u, f] = 1.0 - X[u, f]
        g = g.with_features(X)
    return g
