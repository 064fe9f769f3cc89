"""Graph defenses: Jaccard edge filtering, low-rank SVD, adversarial training."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from ..rng import stream
from ..validation import check_is_fitted
from .gcn import GCN
from .perturbed import PerturbedGraph, apply_flips
from .sparse import GraphError, SparseSym, upper_pairs
from .untargeted import pgd_topology_attack


# ---------------------------------------------------------------------------
# Jaccard


def jaccard_similarity(features, i, j) -> np.ndarray:
    """|N_i ∩ N_j| / |N_i ∪ N_j| over binary feature supports (0 for two empty supports)."""
    X = _binary_features(features)
    a, b = X[np.asarray(i)], X[np.asarray(j)]
    inter = (a * b).sum(-1)
    union = ((a + b) > 0).sum(-1)
    return np.where(union > 0, inter / np.where(union > 0, union, 1), 0.0)


def _binary_features(features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if not np.all((X == 0) | (X == 1)):
        raise GraphError("Jaccard filtering needs binary features; binarize them first (e.g. X > 0)")
    return X


def jaccard_filter(graph, threshold: float = 0.01) -> PerturbedGraph:
    """Drop every edge whose endpoints have Jaccard similarity below ``threshold``.

    Edges with no feature overlap at all are dropped at every threshold.
    """
    threshold = float(threshold)
    if threshold < 0:
        raise ValueError(f"threshold must be >= 0, got {threshold}")
    pairs = graph.adj.pairs
    J = jaccard_similarity(graph.features, pairs[:, 0], pairs[:, 1]) if len(pairs) else np.zeros(0)
    drop = (J < threshold) | (J == 0)
    flips = [(int(i), int(j), -1) for i, j in pairs[drop]]
    return PerturbedGraph(
        apply_flips(graph, flips),
        flips,
        provenance={"defense": "jaccard", "threshold": threshold},
        extra={"similarity": J},
    )


# ---------------------------------------------------------------------------
# Low-rank SVD


def eigh_jacobi(S, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(w, V)`` with ``S = V diag(w) Vᵀ`` and ``w`` ascending.
    """
    A = np.array(S, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"need a square matrix, got {A.shape}")
    if not np.allclose(A, A.T):
        raise ValueError("matrix is not symmetric")
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.linalg.norm(A), 1e-300)
    for _ in range(int(max_sweeps)):
        off = np.sqrt(max(np.sum(A**2) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * A[p, q])
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- Jᵀ A J on rows/columns p and q
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p], A[:, q] = c * ap - s * aq, s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :], A[q, :] = c * ap - s * aq, s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p], V[:, q] = c * vp - s * vq, s * vp + c * vq
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def svd_low_rank(adj, k: int = 10) -> np.ndarray:
    """Best rank-``k`` approximation of a symmetric adjacency (Frobenius norm).

    For symmetric ``A`` the singular values are ``|λ|``, so the ``k``
    eigenpairs of largest magnitude give the truncated SVD.
    """
    A = adj.to_dense() if isinstance(adj, SparseSym) else np.asarray(adj, dtype=np.float64)
    n = A.shape[0]
    if not 1 <= int(k) <= n:
        raise ValueError(f"rank must lie in [1, {n}], got {k}")
    w, V = eigh_jacobi(A)
    keep = np.argsort(-np.abs(w), kind="stable")[: int(k)]
    return (V[:, keep] * w[keep]) @ V[:, keep].T


class GCNJaccard(BaseEstimator):
    """GCN trained and evaluated on the Jaccard-filtered graph."""

    def __init__(self, threshold=0.01, nhid=16, with_relu=True, lr=0.01, weight_decay=5e-4, epochs=200, patience=30, seed=0):
        self.threshold = threshold
        self.nhid = nhid
        self.with_relu = with_relu
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.patience = patience
        self.seed = seed

    def _gcn(self):
        return GCN(self.nhid, self.with_relu, self.lr, self.weight_decay, self.epochs, self.patience, self.seed)

    def transform(self, graph):
        return jaccard_filter(graph, self.threshold).graph

    def fit(self, graph):
        self.filtered_ = jaccard_filter(graph, self.threshold)
        self.gcn_ = self._gcn().fit(self.filtered_.graph)
        return self

    def predict(self, graph):
        check_is_fitted(self, "gcn_")
        return self.gcn_.predict(self.transform(graph))

    def score(self, graph, idx=None):
        check_is_fitted(self, "gcn_")
        return self.gcn_.score(self.transform(graph), idx)


class GCNSVD(GCNJaccard):
    """GCN trained on the rank-``k`` reconstruction, negatives clipped to 0."""

    def __init__(self, k=10, nhid=16, with_relu=True, lr=0.01, weight_decay=5e-4, epochs=200, patience=30, seed=0):
        self.k = k
        self.nhid = nhid
        self.with_relu = with_relu
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.patience = patience
        self.seed = seed

    def reconstruct(self, graph) -> np.ndarray:
        return np.clip(svd_low_rank(graph.adj, self.k), 0.0, None)

    def fit(self, graph):
        self.adj_ = self.reconstruct(graph)
        self.gcn_ = self._gcn().fit(graph, adj=self.adj_)
        return self

    def predict(self, graph):
        check_is_fitted(self, "gcn_")
        return self.gcn_.predict(graph, adj=self.reconstruct(graph))

    def score(self, graph, idx=None):
        check_is_fitted(self, "gcn_")
        return self.gcn_.score(graph, idx, adj=self.reconstruct(graph))


# ---------------------------------------------------------------------------
# Adversarial training


@dataclass
class GraphAdvReport:
    clean_accuracy: list = field(default_factory=list)
    perturbed_accuracy: list = field(default_factory=list)
    flips: list = field(default_factory=list)


def random_flips(graph, budget: int, rng) -> list:
    pairs = upper_pairs(graph.n)
    pick = rng.choice(len(pairs), size=min(int(budget), len(pairs)), replace=False)
    return [(int(i), int(j), -1 if graph.adj.has_edge(i, j) else 1) for i, j in pairs[np.sort(pick)]]


def graph_adversarial_train(
    graph,
    perturbation_source: str = "pgd_topology",
    rounds: int = 10,
    budget: int = 0,
    seed: int = 0,
    model: GCN | None = None,
    attack_steps: int = 20,
    attack_lr: float = 1.0,
) -> GCN:
    """Alternate structure perturbations against the current GCN with training on them.

    The model's epoch allowance is split evenly across ``rounds``; each round
    perturbs the graph (uniform random pair flips or a PGD topology attack on
    the current weights) and trains on the perturbed adjacency. With
    ``budget=0`` this is the plain fit; with ``rounds=0`` the freshly
    initialized model is returned. Per-round accuracies land in
    ``model.adv_report_``.
    """
    if perturbation_source not in ("random", "pgd_topology"):
        raise ValueError(f"unknown perturbation source {perturbation_source!r}")
    if int(budget) < 0 or int(rounds) < 0:
        raise ValueError("budget and rounds must be >= 0")
    model = GCN(seed=seed) if model is None else model
    model.begin_fit(graph)
    report = GraphAdvReport()
    rng = stream(seed, "graph/adv_train")
    rounds = int(rounds)
    for r in range(rounds):
        chunk = model.epochs * (r + 1) // rounds - model.epochs * r // rounds
        if int(budget) == 0:
            flips = []
        elif perturbation_source == "random":
            flips = random_flips(graph, budget, rng)
        else:
            flips = pgd_topology_attack(graph, model, budget, steps=attack_steps, lr=attack_lr, seed=seed + r).flips
        perturbed = apply_flips(graph, flips)
        model.fit_epochs(graph, chunk, adj=perturbed.adj)
        report.flips.append(len(flips))
        report.clean_accuracy.append(model.score(graph))
        report.perturbed_accuracy.append(model.score(perturbed))
    if rounds:
        model.end_fit()
    model.adv_report_ = report
    return model
