"""Two-layer graph convolutional network and gradients w.r.t. its inputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator

from .. import autodiff as ad
from ..autodiff import Tensor
from ..models.training import Adam, TrainingError, TrainReport
from ..rng import stream
from ..validation import check_is_fitted
from .sparse import SparseSym, normalize_adj, normalize_adj_tensor, spmm


def check_splits(n: int, *splits) -> None:
    seen = np.zeros(n, dtype=bool)
    for idx in splits:
        if idx is None:
            continue
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= n):
            raise ValueError(f"split index outside [0, {n})")
        if np.unique(idx).size != idx.size or seen[idx].any():
            raise ValueError("train/val/test index sets overlap")
        seen[idx] = True


def _adjacency_matrix(adj):
    """Normalized sparse operator from a SparseSym, scipy matrix or dense weights."""
    return normalize_adj(adj)


def other_class_max(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Index of the largest logit excluding ``labels`` (lowest index on ties)."""
    masked = logits.copy()
    masked[np.arange(len(labels)), labels] = -np.inf
    return np.argmax(masked, axis=1)


def margin(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Z_y minus the best competing logit; negative means misclassified."""
    rows = np.arange(len(labels))
    return logits[rows, labels] - logits[rows, other_class_max(logits, labels)]


@dataclass
class LossSpec:
    """Attack objective over ``nodes``; the attacker maximizes it.

    ``kind="ce"`` is cross-entropy against ``labels``; ``kind="cw"`` is the
    negative classification margin (best other logit minus the label logit).
    """

    nodes: np.ndarray
    labels: np.ndarray
    kind: str = "ce"

    def __post_init__(self):
        self.nodes = np.atleast_1d(np.asarray(self.nodes, dtype=np.int64))
        self.labels = np.atleast_1d(np.asarray(self.labels, dtype=np.int64))
        if self.nodes.shape != self.labels.shape:
            raise ValueError("nodes and labels must have the same length")
        if self.kind not in ("ce", "cw"):
            raise ValueError(f"unknown loss kind {self.kind!r}")

    def __call__(self, logits: Tensor) -> Tensor:
        sel = logits[self.nodes]
        if self.kind == "ce":
            return ad.cross_entropy(sel, self.labels)
        rows = np.arange(len(self.nodes))
        best_other = other_class_max(sel.data, self.labels)
        return (sel[rows, best_other] - sel[rows, self.labels]).mean()


class GCN(BaseEstimator):
    """``logits = Â · σ(Â · X · W0) · W1`` with Â the renormalized adjacency.

    ``with_relu=False`` gives the linearized surrogate ``Â² X W0 W1``.
    """

    def __init__(self, nhid=16, with_relu=True, lr=0.01, weight_decay=5e-4, epochs=200, patience=30, seed=0):
        self.nhid = nhid
        self.with_relu = with_relu
        self.lr = lr
        self.weight_decay = weight_decay
        self.epochs = epochs
        self.patience = patience
        self.seed = seed

    def initialize(self, n_features: int, n_classes: int) -> "GCN":
        rng = stream(self.seed, "gcn/init")
        b0 = 1.0 / np.sqrt(n_features)
        b1 = 1.0 / np.sqrt(self.nhid)
        self.W0_ = Tensor(rng.uniform(-b0, b0, size=(n_features, self.nhid)), requires_grad=True)
        self.W1_ = Tensor(rng.uniform(-b1, b1, size=(self.nhid, n_classes)), requires_grad=True)
        self.n_classes_ = int(n_classes)
        return self

    def parameters(self):
        return [self.W0_, self.W1_]

    def get_weights(self):
        return [p.data.copy() for p in self.parameters()]

    def set_weights(self, arrays):
        for p, a in zip(self.parameters(), arrays):
            p.data = np.array(a, dtype=np.float64)

    def forward(self, features, adj_norm) -> Tensor:
        """Logits for every node; ``adj_norm`` is a sparse constant or a dense Tensor."""
        check_is_fitted(self, "W0_")
        X = ad.as_tensor(features)
        if isinstance(adj_norm, Tensor):
            h = adj_norm @ (X @ self.W0_)
        else:
            h = spmm(adj_norm, X @ self.W0_)
        if self.with_relu:
            h = ad.relu(h)
        if isinstance(adj_norm, Tensor):
            return adj_norm @ (h @ self.W1_)
        return spmm(adj_norm, h @ self.W1_)

    # -- training -----------------------------------------------------------

    def begin_fit(self, graph):
        """Fresh parameters and optimizer state; see :meth:`fit_epochs`."""
        self.initialize(graph.features.shape[1], int(np.max(graph.labels)) + 1)
        self._opt = Adam(self.parameters(), lr=self.lr, weight_decay=self.weight_decay)
        self._best = (np.inf, self.get_weights())
        self._bad_epochs = 0
        self._stopped = False
        self.report_ = TrainReport()
        return self

    def fit_epochs(self, graph, epochs: int, adj=None, idx_train=None, idx_val=None) -> "GCN":
        """Continue training for up to ``epochs`` epochs on ``adj``."""
        idx_train = graph.idx_train if idx_train is None else np.asarray(idx_train)
        idx_val = graph.idx_val if idx_val is None else np.asarray(idx_val)
        check_splits(graph.features.shape[0], idx_train, idx_val, graph.idx_test)
        A = _adjacency_matrix(graph.adj if adj is None else adj)
        X, y = graph.features, graph.labels
        for _ in range(int(epochs)):
            if self._stopped:
                break
            for p in self.parameters():
                p.grad = None
            logits = self.forward(X, A)
            loss = ad.cross_entropy(logits[idx_train], y[idx_train])
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingError(f"non-finite GCN loss at epoch {len(self.report_.losses)}")
            loss.backward()
            self._opt.step()
            self.report_.losses.append(value)
            if idx_val is not None and len(idx_val):
                with ad.no_grad():
                    out = self.forward(X, A).data
                val_loss = float(ad.cross_entropy(Tensor(out[idx_val]), y[idx_val]).data)
                self.report_.accuracy.append(float(np.mean(out[idx_val].argmax(1) == y[idx_val])))
                if val_loss < self._best[0]:
                    self._best = (val_loss, self.get_weights())
                    self._bad_epochs = 0
                else:
                    self._bad_epochs += 1
                    if self.patience is not None and self._bad_epochs >= self.patience:
                        self._stopped = True
        return self

    def end_fit(self) -> "GCN":
        if np.isfinite(self._best[0]):
            self.set_weights(self._best[1])
        for p in self.parameters():
            p.grad = None
        return self

    def fit(self, graph, adj=None, idx_train=None, idx_val=None) -> "GCN":
        """Train on ``graph`` (optionally with a replacement adjacency).

        Minimizes cross-entropy on the training nodes with Adam; the weights
        with the lowest validation loss are kept (patience ``self.patience``).
        """
        self.begin_fit(graph)
        self.fit_epochs(graph, self.epochs, adj=adj, idx_train=idx_train, idx_val=idx_val)
        return self.end_fit()

    # -- inference ----------------------------------------------------------

    def logits(self, graph, adj=None, features=None) -> np.ndarray:
        A = _adjacency_matrix(graph.adj if adj is None else adj)
        X = graph.features if features is None else features
        with ad.no_grad():
            return self.forward(X, A).data

    def predict_proba(self, graph, adj=None, features=None) -> np.ndarray:
        return ad.softmax_np(self.logits(graph, adj, features))

    def predict(self, graph, adj=None, features=None) -> np.ndarray:
        return np.argmax(self.logits(graph, adj, features), axis=1)

    def score(self, graph, idx=None, adj=None, features=None) -> float:
        """Accuracy on ``idx`` (the test split by default)."""
        idx = graph.idx_test if idx is None else np.asarray(idx)
        pred = self.predict(graph, adj, features)
        return float(np.mean(pred[idx] == graph.labels[idx]))


def input_gradients(model: GCN, graph, loss_spec: LossSpec, adj=None, features=None, wrt=("adj", "features")):
    """Gradient of ``loss_spec`` w.r.t. the dense adjacency and/or features.

    The adjacency gradient is symmetrized as (G + Gᵀ)/2 with a zeroed
    diagonal; the derivative along a symmetric pair flip (i, j) is twice its
    (i, j) entry. Returns ``(loss_value, {"adj": ..., "features": ...})``.
    """
    adj = graph.adj if adj is None else adj
    A0 = adj.to_dense() if isinstance(adj, SparseSym) else np.asarray(adj, dtype=np.float64)
    X0 = graph.features if features is None else features
    A = Tensor(A0, requires_grad="adj" in wrt)
    X = Tensor(X0, requires_grad="features" in wrt)
    loss = loss_spec(model.forward(X, normalize_adj_tensor(A)))
    out = {}
    if A.requires_grad or X.requires_grad:
        loss.backward()
    if "adj" in wrt:
        G = A.grad if A.grad is not None else np.zeros_like(A0)
        G = (G + G.T) / 2.0
        np.fill_diagonal(G, 0.0)
        out["adj"] = G
    if "features" in wrt:
        out["features"] = X.grad if X.grad is not None else np.zeros_like(X.data)
    for p in model.parameters():
        p.grad = None
    return float(loss.data), out


def attack_loss_value(model: GCN, graph, loss_spec: LossSpec, adj=None, features=None) -> float:
    adj = graph.adj if adj is None else adj
    A = normalize_adj(adj)
    X = graph.features if features is None else features
    with ad.no_grad():
        return float(loss_spec(model.forward(X, A)).data)


def dense_adj(adj) -> np.ndarray:
    if isinstance(adj, SparseSym):
        return adj.to_dense()
    if sp.issparse(adj):
        return np.asarray(adj.todense(), dtype=np.float64)
    return np.asarray(adj, dtype=np.float64)
