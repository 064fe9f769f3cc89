"""Targeted structure/feature attacks on one node: FGA, Nettack, IG-attack, RND."""

from __future__ import annotations

import numpy as np

from ..rng import stream
from .gcn import GCN, LossSpec, attack_loss_value, input_gradients, margin
from .perturbed import GraphBudget, PerturbedGraph, TargetSpec, apply_flips, flip_sign
from .sparse import GraphError


def _check_target(graph, target: TargetSpec):
    if not 0 <= target.node < graph.n:
        raise GraphError(f"target node {target.node} outside [0, {graph.n})")
    if not 0 <= target.label < graph.num_classes:
        raise GraphError(f"target label {target.label} outside [0, {graph.num_classes})")


def _candidate_pairs(n: int, node: int, direct: bool, taken) -> np.ndarray:
    if direct:
        others = np.array([v for v in range(n) if v != node], dtype=np.int64)
        pairs = np.stack([np.minimum(others, node), np.maximum(others, node)], axis=1)
    else:
        i, j = np.triu_indices(n, 1)
        pairs = np.stack([i, j], axis=1)
    if taken:
        keep = np.array([(int(a), int(b)) not in taken for a, b in pairs], dtype=bool)
        pairs = pairs[keep]
    return pairs


def _provenance(name, budget, seed=None, **kw):
    prov = {"attack": name, "budget": int(budget.max_flips), "feature_budget": int(budget.feature_budget)}
    if seed is not None:
        prov["seed"] = int(seed)
    prov.update(kw)
    return prov


# ---------------------------------------------------------------------------
# FGA


def fga(graph, surrogate: GCN, target: TargetSpec, budget: GraphBudget, direct: bool = True) -> PerturbedGraph:
    """Greedy flips along the largest admissible adjacency gradient.

    An insertion needs a positive gradient, a deletion a negative one; the
    score is ``G_ij·(1 − 2A_ij)`` and gradients are recomputed after every
    flip. Stops early when nothing admissible is left.
    """
    _check_target(graph, target)
    spec = LossSpec([target.node], [target.label], target.loss)
    flips, taken, scores = [], set(), []
    current = graph
    for _ in range(int(budget.max_flips)):
        _, grads = input_gradients(surrogate, current, spec, wrt=("adj",))
        G = grads["adj"]
        pairs = _candidate_pairs(graph.n, target.node, direct, taken)
        if not len(pairs):
            break
        A = current.adj
        direction = np.array([1.0 - 2.0 * A.has_edge(i, j) for i, j in pairs])
        score = G[pairs[:, 0], pairs[:, 1]] * direction
        k = int(np.argmax(score))
        if not score[k] > 0:
            break
        i, j = (int(v) for v in pairs[k])
        flips.append((i, j, flip_sign(A, i, j)))
        taken.add((i, j))
        scores.append(float(score[k]))
        current = current.with_adj(A.flip([(i, j)]))
    return PerturbedGraph(
        current,
        flips,
        provenance=_provenance("fga", budget, target=target.node, direct=direct),
        shortfall=int(budget.max_flips) - len(flips),
        extra={"scores": scores},
    )


# ---------------------------------------------------------------------------
# Nettack


def _dense_norm(A: np.ndarray) -> np.ndarray:
    M = A + np.eye(A.shape[0])
    d = 1.0 / np.sqrt(M.sum(1))
    return M * d[:, None] * d[None, :]


def _target_margin(A: np.ndarray, XW: np.ndarray, node: int, label: int) -> float:
    An = _dense_norm(A)
    z = An[node] @ (An @ XW)
    return float(margin(z[None], np.array([label]))[0])


def _degree_ok(A, clean_deg, i, j):
    for v in (i, j):
        new = A[v].sum() + (1 - 2 * A[i, j])
        if new < clean_deg[v] / 2.0 or new > 2.0 * max(clean_deg[v], 1):
            return False
    return True


def nettack(
    graph,
    surrogate: GCN,
    target: TargetSpec,
    budget: GraphBudget,
    unnoticeable: bool = True,
    direct: bool = True,
) -> PerturbedGraph:
    """Greedy minimization of the target's margin under the linearized GCN.

    Each candidate flip is scored by the exact margin of the target after
    the flip, recomputed from ``Â'² X W``. With ``unnoticeable`` on, a
    structure flip may not move an endpoint's degree outside
    ``[d/2, 2·max(d, 1)]`` of its clean degree ``d``, and a feature may only
    be switched on if it co-occurs in the clean graph with every feature the
    node already has.
    """
    _check_target(graph, target)
    if surrogate.with_relu:
        raise GraphError("nettack needs the linearized surrogate (with_relu=False)")
    u, y = target.node, target.label
    W = surrogate.W0_.data @ surrogate.W1_.data
    A = graph.adj.to_dense()
    X = graph.features.copy()
    clean_deg = A.sum(1)
    cooc = (graph.features.T @ graph.features) > 0
    flips, fflips, taken, ftaken, scores = [], [], set(), set(), []
    s_left = int(budget.max_flips)
    f_left = int(budget.feature_budget) if budget.allow_feature_flips else 0
    while s_left or f_left:
        XW = X @ W
        best = None
        if s_left:
            for i, j in _candidate_pairs(graph.n, u, direct, taken):
                i, j = int(i), int(j)
                if unnoticeable and not _degree_ok(A, clean_deg, i, j):
                    continue
                A[i, j] = A[j, i] = 1 - A[i, j]
                m = _target_margin(A, XW, u, y)
                A[i, j] = A[j, i] = 1 - A[i, j]
                if best is None or m < best[0]:
                    best = (m, "edge", i, j)
        if f_left:
            An = _dense_norm(A)
            base = (An[u] @ (An @ XW))
            coef = (An @ An)[u, u]
            for f in range(X.shape[1]):
                if (u, f) in ftaken:
                    continue
                delta = 1.0 - 2.0 * X[u, f]
                if unnoticeable and delta > 0:
                    have = np.flatnonzero(X[u])
                    if have.size and not cooc[f, have[have != f]].all():
                        continue
                z = base + coef * delta * W[f]
                m = float(margin(z[None], np.array([y]))[0])
                if best is None or m < best[0]:
                    best = (m, "feature", u, f)
        if best is None:
            break
        m, kind, a, b = best
        if kind == "edge":
            flips.append((a, b, -1 if A[a, b] else 1))
            taken.add((a, b))
            A[a, b] = A[b, a] = 1 - A[a, b]
            s_left -= 1
        else:
            fflips.append((a, b, -1 if X[a, b] else 1))
            ftaken.add((a, b))
            X[a, b] = 1 - X[a, b]
            f_left -= 1
        scores.append(m)
    out = apply_flips(graph, flips, fflips)
    return PerturbedGraph(
        out,
        flips,
        fflips,
        provenance=_provenance("nettack", budget, target=target.node, unnoticeable=unnoticeable, direct=direct),
        shortfall=int(budget.max_flips) - len(flips),
        extra={"margins": scores},
    )


# ---------------------------------------------------------------------------
# IG-attack


def integrated_gradients(grad_fn, x, baseline, steps: int) -> np.ndarray:
    """``(x − b) · mean_k grad_fn(b + k/m (x − b))`` for ``k = 1..m``."""
    steps = int(steps)
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    x = np.asarray(x, dtype=np.float64)
    b = np.asarray(baseline, dtype=np.float64)
    total = np.zeros_like(x)
    for k in range(1, steps + 1):
        total += grad_fn(b + (k / steps) * (x - b))
    return (x - b) * total / steps


def _with_entry(M, i, j, value, sym=True):
    out = M.copy()
    out[i, j] = value
    if sym:
        out[j, i] = value
    return out


def ig_attack(
    graph,
    surrogate: GCN,
    target: TargetSpec,
    budget: GraphBudget,
    ig_steps: int = 20,
    direct: bool = True,
) -> PerturbedGraph:
    """Greedy flips ranked by integrated gradients.

    For a candidate entry the path runs from the graph with that entry
    flipped (the baseline) to the current graph, so ``−IG`` estimates the
    loss gain of the flip. Edges and, when allowed, the target's features
    compete in one ranking; stops early when no flip raises the loss.
    """
    _check_target(graph, target)
    if int(ig_steps) < 1:
        raise ValueError(f"ig_steps must be >= 1, got {ig_steps}")
    spec = LossSpec([target.node], [target.label], target.loss)
    u = target.node
    A = graph.adj.to_dense()
    X = graph.features.copy()
    flips, fflips, taken, ftaken, scores = [], [], set(), set(), []
    s_left = int(budget.max_flips)
    f_left = int(budget.feature_budget) if budget.allow_feature_flips else 0

    def adj_grad(M):
        return input_gradients(surrogate, graph, spec, adj=M, features=X, wrt=("adj",))[1]["adj"]

    def feat_grad(F):
        return input_gradients(surrogate, graph, spec, adj=A, features=F, wrt=("features",))[1]["features"]

    while s_left or f_left:
        best = None
        if s_left:
            for i, j in _candidate_pairs(graph.n, u, direct, taken):
                i, j = int(i), int(j)
                # a pair flip moves two symmetric entries
                ig = 2 * integrated_gradients(lambda v: adj_grad(_with_entry(A, i, j, v))[i, j], A[i, j], 1 - A[i, j], ig_steps)
                gain = -float(ig)
                if best is None or gain > best[0]:
                    best = (gain, "edge", i, j)
        if f_left:
            for f in range(X.shape[1]):
                if (u, f) in ftaken:
                    continue
                ig = integrated_gradients(lambda v: feat_grad(_with_entry(X, u, f, v, sym=False))[u, f], X[u, f], 1 - X[u, f], ig_steps)
                gain = -float(ig)
                if best is None or gain > best[0]:
                    best = (gain, "feature", u, f)
        if best is None or not best[0] > 0:
            break
        gain, kind, a, c = best
        if kind == "edge":
            flips.append((a, c, -1 if A[a, c] else 1))
            taken.add((a, c))
            A[a, c] = A[c, a] = 1 - A[a, c]
            s_left -= 1
        else:
            fflips.append((a, c, -1 if X[a, c] else 1))
            ftaken.add((a, c))
            X[a, c] = 1 - X[a, c]
            f_left -= 1
        scores.append(gain)
    return PerturbedGraph(
        apply_flips(graph, flips, fflips),
        flips,
        fflips,
        provenance=_provenance("ig_attack", budget, target=u, ig_steps=int(ig_steps), direct=direct),
        shortfall=int(budget.max_flips) - len(flips),
        extra={"gains": scores},
    )


# ---------------------------------------------------------------------------
# RND


def rnd(graph, target: TargetSpec, budget: GraphBudget, seed: int = 0) -> PerturbedGraph:
    """Connect the target to randomly chosen nodes of other classes."""
    _check_target(graph, target)
    u = target.node
    labels = graph.labels
    pool = np.array(
        [v for v in range(graph.n) if v != u and labels[v] != labels[u] and not graph.adj.has_edge(u, v)],
        dtype=np.int64,
    )
    k = min(int(budget.max_flips), pool.size)
    chosen = stream(seed, "graph/rnd").choice(pool, size=k, replace=False) if k else np.zeros(0, np.int64)
    flips = [(int(min(u, v)), int(max(u, v)), 1) for v in chosen]
    return PerturbedGraph(
        apply_flips(graph, flips),
        flips,
        provenance=_provenance("rnd", budget, seed, target=u),
        shortfall=int(budget.max_flips) - k,
    )


def attack_succeeded(model: GCN, perturbed: PerturbedGraph, target: TargetSpec) -> bool:
    """Evasion check: is the target misclassified on the perturbed graph?"""
    return bool(model.predict(perturbed.graph)[target.node] != target.label)


__all__ = [
    "attack_loss_value",
    "attack_succeeded",
    "fga",
    "ig_attack",
    "integrated_gradients",
    "nettack",
    "rnd",
]
