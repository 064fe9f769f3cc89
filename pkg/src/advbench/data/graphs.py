"""Graph datasets: container, stochastic block model, text-format I/O.

On-disk layout (all plain text):

* edge list: one whitespace-separated integer pair per line, ``#`` comments
* features: CSV of floats, row ``i`` is node ``i``
* labels: one integer per line
* optional JSON sidecar with splits and provenance
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..graph.sparse import SparseSym
from ..rng import stream


class GraphFormatError(ValueError):
    pass


@dataclass
class GraphDataset:
    adj: SparseSym
    features: np.ndarray
    labels: np.ndarray
    idx_train: np.ndarray
    idx_val: np.ndarray
    idx_test: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.idx_train = np.asarray(self.idx_train, dtype=np.int64)
        self.idx_val = np.asarray(self.idx_val, dtype=np.int64)
        self.idx_test = np.asarray(self.idx_test, dtype=np.int64)
        self.validate()

    @property
    def n(self) -> int:
        return self.adj.n

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def idx_unlabeled(self) -> np.ndarray:
        """Every node outside the training split."""
        mask = np.ones(self.n, dtype=bool)
        mask[self.idx_train] = False
        return np.flatnonzero(mask)

    def validate(self) -> None:
        n = self.adj.n
        if self.features.ndim != 2 or self.features.shape[0] != n:
            raise ValueError(f"features must be [{n}, d], got {self.features.shape}")
        if self.labels.shape != (n,):
            raise ValueError(f"labels must have length {n}, got {self.labels.shape}")
        if self.labels.min() < 0:
            raise ValueError("labels must be nonnegative")
        seen = np.zeros(n, dtype=bool)
        for name in ("idx_train", "idx_val", "idx_test"):
            idx = getattr(self, name)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise ValueError(f"{name} has entries outside [0, {n})")
            if np.unique(idx).size != idx.size or seen[idx].any():
                raise ValueError(f"{name} overlaps another split")
            seen[idx] = True

    def with_adj(self, adj: SparseSym, **meta) -> "GraphDataset":
        return GraphDataset(adj, self.features, self.labels, self.idx_train, self.idx_val, self.idx_test, {**self.meta, **meta})

    def with_features(self, features) -> "GraphDataset":
        return GraphDataset(self.adj, features, self.labels, self.idx_train, self.idx_val, self.idx_test, dict(self.meta))


def stratified_split(labels, fractions=(0.1, 0.1, 0.8), seed: int = 0):
    """Per-class shuffled train/val/test indices (at least one train node per class)."""
    labels = np.asarray(labels)
    rng = stream(seed, "data/graph_split")
    train, val, test = [], [], []
    for c in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == c))
        k_train = max(1, int(round(fractions[0] * members.size)))
        k_val = int(round(fractions[1] * members.size))
        train.append(members[:k_train])
        val.append(members[k_train : k_train + k_val])
        test.append(members[k_train + k_val :])
    return tuple(np.sort(np.concatenate(s)).astype(np.int64) for s in (train, val, test))


def make_sbm(
    block_sizes=(20, 20),
    p_in: float = 0.3,
    p_out: float = 0.02,
    feature_dim: int = 24,
    seed: int = 0,
    feature_p: float = 0.15,
    feature_signal: float = 0.1,
    split=(0.1, 0.1, 0.8),
) -> GraphDataset:
    """Stochastic block model with class-biased binary features.

    Every class owns a contiguous slice of ``feature_dim``; a node's own-class
    features fire with probability ``feature_p + feature_signal`` and all
    others with ``feature_p``.
    """
    block_sizes = [int(b) for b in block_sizes]
    if len(block_sizes) < 2 or min(block_sizes) < 1:
        raise ValueError(f"need at least two nonempty blocks, got {block_sizes}")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError(f"need 0 <= p_out <= p_in <= 1, got p_in={p_in}, p_out={p_out}")
    if feature_dim < 1:
        raise ValueError(f"feature_dim must be >= 1, got {feature_dim}")
    if not (0.0 <= feature_p and feature_p + feature_signal <= 1.0 and feature_signal >= 0):
        raise ValueError("feature probabilities must lie in [0, 1]")
    rng = stream(seed, "data/sbm")
    labels = np.repeat(np.arange(len(block_sizes)), block_sizes)
    n = labels.size
    i, j = np.triu_indices(n, 1)
    prob = np.where(labels[i] == labels[j], p_in, p_out)
    keep = rng.random(i.size) < prob
    adj = SparseSym(n, np.stack([i[keep], j[keep]], axis=1))
    k = len(block_sizes)
    owner = np.arange(feature_dim) * k // feature_dim
    fprob = feature_p + feature_signal * (owner[None, :] == labels[:, None])
    features = (rng.random((n, feature_dim)) < fprob).astype(np.float64)
    idx_train, idx_val, idx_test = stratified_split(labels, split, seed)
    return GraphDataset(adj, features, labels, idx_train, idx_val, idx_test, {"source": "sbm", "seed": seed})


def _parse_numbers(path: Path, kind, sep=None):
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.split(sep) if sep else text.split()
            try:
                rows.append([kind(tok.strip()) for tok in tokens])
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-numeric token in {line.strip()!r}") from None
    return rows


def load_graph(edge_list_path, features_path, labels_path, splits=None, seed: int = 0) -> GraphDataset:
    """Read the three text files; symmetrize and deduplicate edges.

    Self-loops are dropped; their count is recorded in
    ``meta["self_loops_dropped"]`` and announced with a warning.
    """
    features = np.asarray(_parse_numbers(Path(features_path), float, sep=","), dtype=np.float64)
    label_rows = _parse_numbers(Path(labels_path), int)
    if any(len(r) != 1 for r in label_rows):
        raise GraphFormatError(f"{labels_path}: expected one integer per line")
    labels = np.array([r[0] for r in label_rows], dtype=np.int64)
    n = labels.size
    if features.ndim != 2 or features.shape[0] != n:
        raise GraphFormatError(f"{features_path}: {features.shape[0] if features.ndim else 0} feature rows for {n} labels")
    pairs = []
    with open(edge_list_path) as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            tokens = text.split()
            if len(tokens) != 2:
                raise GraphFormatError(f"{edge_list_path}:{lineno}: expected two node indices, got {line.strip()!r}")
            try:
                u, v = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise GraphFormatError(f"{edge_list_path}:{lineno}: non-numeric token in {line.strip()!r}") from None
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"{edge_list_path}:{lineno}: node index out of range [0, {n}) in {line.strip()!r}")
            pairs.append((u, v))
    loops = sum(1 for u, v in pairs if u == v)
    if loops:
        warnings.warn(f"dropped {loops} self-loop(s) from {edge_list_path}", stacklevel=2)
    adj = SparseSym(n, [(u, v) for u, v in pairs if u != v])
    if splits is None:
        splits = stratified_split(labels, seed=seed)
    return GraphDataset(adj, features, labels, *splits, meta={"self_loops_dropped": loops})


def save_graph(graph: GraphDataset, directory, provenance: dict | None = None) -> Path:
    """Write edges.txt, features.csv, labels.txt and graph.json into ``directory``."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "edges.txt", "w") as fh:
        fh.write(f"# {graph.n} nodes, {graph.adj.n_edges} undirected edges\n")
        for u, v in graph.adj.pairs:
            fh.write(f"{u} {v}\n")
    with open(d / "features.csv", "w") as fh:
        for row in graph.features:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    with open(d / "labels.txt", "w") as fh:
        fh.write("".join(f"{int(v)}\n" for v in graph.labels))
    sidecar = {
        "n": graph.n,
        "idx_train": graph.idx_train.tolist(),
        "idx_val": graph.idx_val.tolist(),
        "idx_test": graph.idx_test.tolist(),
        "provenance": provenance or {},
    }
    (d / "graph.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return d


def load_graph_dir(directory) -> GraphDataset:
    d = Path(directory)
    sidecar = d / "graph.json"
    splits, prov = None, {}
    if sidecar.exists():
        meta = json.loads(sidecar.read_text())
        splits = (meta["idx_train"], meta["idx_val"], meta["idx_test"])
        prov = meta.get("provenance", {})
    g = load_graph(d / "edges.txt", d / "features.csv", d / "labels.txt", splits=splits)
    g.meta["provenance"] = prov
    return g
