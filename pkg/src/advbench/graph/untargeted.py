"""Untargeted (global) structure attacks: Metattack, PGD/min-max topology, DICE."""

from __future__ import annotations

import copy

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..models.training import Adam
from ..rng import stream
from .gcn import GCN, LossSpec, attack_loss_value, input_gradients
from .perturbed import GraphBudget, PerturbedGraph, apply_flips
from .projection import project_capped_box
from .sparse import GraphError, normalize_adj_tensor, upper_pairs


def _as_budget(budget) -> GraphBudget:
    return budget if isinstance(budget, GraphBudget) else GraphBudget(int(budget))


def _flip_list(A: np.ndarray, pairs) -> list:
    return [(int(i), int(j), -1 if A[i, j] else 1) for i, j in pairs]


def self_training_labels(graph, model: GCN) -> np.ndarray:
    """True labels on training nodes, ``model`` predictions elsewhere."""
    labels = model.predict(graph).copy()
    labels[graph.idx_train] = graph.labels[graph.idx_train]
    return labels


# ---------------------------------------------------------------------------
# Metattack


def _inner_init(n_features, nhid, n_classes, seed):
    rng = stream(seed, "graph/metattack/init")
    b0, b1 = 1.0 / np.sqrt(n_features), 1.0 / np.sqrt(nhid)
    return rng.uniform(-b0, b0, (n_features, nhid)), rng.uniform(-b1, b1, (nhid, n_classes))


def _unrolled_weights(An: Tensor, X, labels, idx_train, init, steps, lr, momentum, with_relu):
    """Momentum gradient descent on the training CE, recorded on the tape.

    The parameter gradient is written out in tape ops (it is linear in the
    softmax residual), so differentiating the result w.r.t. ``An`` follows
    every inner step exactly.
    """
    n, c = An.shape[0], init[1].shape[1]
    Y = np.zeros((n, c))
    Y[idx_train, labels[idx_train]] = 1.0
    rows = np.zeros((n, c))
    rows[idx_train] = 1.0 / len(idx_train)
    AX = An @ Tensor(X)
    W0, W1 = Tensor(init[0]), Tensor(init[1])
    V0, V1 = Tensor(np.zeros_like(init[0])), Tensor(np.zeros_like(init[1]))
    for _ in range(int(steps)):
        H = AX @ W0
        R = ad.relu(H) if with_relu else H
        AR = An @ R
        dZ = (ad.softmax(AR @ W1) - Y) * rows
        g1 = ad.transpose(AR) @ dZ
        dR = ad.transpose(An) @ (dZ @ ad.transpose(W1))
        if with_relu:
            dR = dR * (H.data > 0).astype(np.float64)
        g0 = ad.transpose(AX) @ dR
        V0 = V0 * momentum + g0
        V1 = V1 * momentum + g1
        W0 = W0 - V0 * lr
        W1 = W1 - V1 * lr
    return W0, W1, AX


def meta_gradient(
    graph,
    A: np.ndarray,
    attack_labels: np.ndarray,
    idx_attack: np.ndarray,
    init,
    inner_steps: int = 100,
    inner_lr: float = 0.1,
    momentum: float = 0.9,
    with_relu: bool = False,
) -> tuple[float, np.ndarray]:
    """Attack loss after unrolled training on ``A`` and its symmetrized gradient.

    The loss is the cross-entropy of ``attack_labels`` on ``idx_attack`` for
    the surrogate obtained by ``inner_steps`` momentum steps from ``init``.
    """
    At = Tensor(np.asarray(A, dtype=np.float64), requires_grad=True)
    An = normalize_adj_tensor(At)
    W0, W1, AX = _unrolled_weights(An, graph.features, graph.labels, graph.idx_train, init, inner_steps, inner_lr, momentum, with_relu)
    H = AX @ W0
    logits = An @ ((ad.relu(H) if with_relu else H) @ W1)
    loss = ad.cross_entropy(logits[idx_attack], attack_labels[idx_attack])
    loss.backward()
    G = (At.grad + At.grad.T) / 2.0
    np.fill_diagonal(G, 0.0)
    return float(loss.data), G


def metattack(
    graph,
    budget,
    inner_steps: int = 100,
    inner_lr: float = 0.1,
    momentum: float = 0.9,
    self_training: bool = True,
    with_relu: bool = False,
    nhid: int = 16,
    seed: int = 0,
    surrogate: GCN | None = None,
) -> PerturbedGraph:
    """Poisoning attack by greedy meta-gradient flips.

    Each step unrolls surrogate training on the current graph from a fixed
    initialization, differentiates the attack loss through it, and flips
    the admissible pair with the largest ``G_ij·(1 − 2A_ij)``. Removals that
    would leave a node without neighbours are not admissible. With
    ``self_training`` the loss covers every non-training node labelled by
    a clean surrogate's predictions; otherwise it is the training loss.
    """
    budget = _as_budget(budget)
    if int(inner_steps) < 1:
        raise GraphError(f"inner_steps must be >= 1, got {inner_steps}")
    if surrogate is None:
        surrogate = GCN(nhid=nhid, with_relu=False, seed=seed).fit(graph)
    if self_training:
        labels, idx_attack = self_training_labels(graph, surrogate), graph.idx_unlabeled
    else:
        labels, idx_attack = graph.labels, graph.idx_train
    init = _inner_init(graph.features.shape[1], nhid, graph.num_classes, seed)
    A = graph.adj.to_dense()
    pairs = upper_pairs(graph.n)
    taken = np.zeros(len(pairs), dtype=bool)
    flips, losses = [], []
    for _ in range(int(budget.max_flips)):
        loss, G = meta_gradient(graph, A, labels, idx_attack, init, inner_steps, inner_lr, momentum, with_relu)
        i, j = pairs[:, 0], pairs[:, 1]
        score = G[i, j] * (1.0 - 2.0 * A[i, j])
        deg = A.sum(1)
        singleton = (A[i, j] == 1) & ((deg[i] <= 1) | (deg[j] <= 1))
        score[taken | singleton] = -np.inf
        k = int(np.argmax(score))
        if not np.isfinite(score[k]):
            break
        a, b = int(i[k]), int(j[k])
        flips.append((a, b, -1 if A[a, b] else 1))
        A[a, b] = A[b, a] = 1 - A[a, b]
        taken[k] = True
        losses.append(loss)
    return PerturbedGraph(
        apply_flips(graph, flips),
        flips,
        provenance={
            "attack": "metattack",
            "budget": int(budget.max_flips),
            "seed": int(seed),
            "inner_steps": int(inner_steps),
            "self_training": bool(self_training),
        },
        shortfall=int(budget.max_flips) - len(flips),
        extra={"meta_losses": losses},
    )


# ---------------------------------------------------------------------------
# PGD / min-max topology attacks


def _relaxed_adj(A, pairs, s):
    S = np.zeros_like(A)
    S[pairs[:, 0], pairs[:, 1]] = s
    S = S + S.T
    return A + (1.0 - 2.0 * A) * S


def _s_gradient(model, graph, spec, A, pairs, s):
    loss, g = input_gradients(model, graph, spec, adj=_relaxed_adj(A, pairs, s), wrt=("adj",))
    i, j = pairs[:, 0], pairs[:, 1]
    # s_ij drives both symmetric entries
    return loss, 2.0 * g["adj"][i, j] * (1.0 - 2.0 * A[i, j])


def _ascent(model, graph, spec, A, pairs, s, cap, lr, t):
    loss, g = _s_gradient(model, graph, spec, A, pairs, s)
    s = project_capped_box(s + lr / np.sqrt(t + 1) * g, cap)
    return s, loss


def _discretize(model, graph, spec, A, pairs, s, cap, num_samples, rng):
    best, best_loss = None, -np.inf
    for _ in range(int(num_samples)):
        draw = rng.random(len(s)) < s
        if draw.sum() > cap:
            continue
        value = attack_loss_value(model, graph, spec, adj=_relaxed_adj(A, pairs, draw.astype(np.float64)))
        if value > best_loss:
            best, best_loss = draw, value
    fallback = best is None
    if fallback:
        # no feasible draw: keep the ``cap`` largest entries
        best = np.zeros(len(s), dtype=bool)
        top = np.argsort(-s, kind="stable")[: int(cap)]
        best[top[s[top] > 0]] = True
    return best, best_loss, fallback


def _attack_spec(graph, model, loss):
    labels = self_training_labels(graph, model)
    idx = graph.idx_unlabeled
    return LossSpec(idx, labels[idx], loss)


def _topology_result(name, graph, A, pairs, chosen, budget, seed, extra, **prov):
    flips = _flip_list(A, pairs[chosen])
    return PerturbedGraph(
        apply_flips(graph, flips),
        flips,
        provenance={"attack": name, "budget": int(budget.max_flips), "seed": int(seed), **prov},
        shortfall=int(budget.max_flips) - len(flips),
        extra=extra,
    )


def pgd_topology_attack(
    graph,
    model: GCN,
    budget,
    steps: int = 100,
    lr: float = 1.0,
    num_samples: int = 20,
    loss: str = "ce",
    seed: int = 0,
    s_init=None,
) -> PerturbedGraph:
    """Evasion attack on a fixed GCN by projected gradient ascent.

    The relaxed flip vector ``s ∈ [0,1]`` over all node pairs gives
    ``A' = A + (1 − 2A)∘S``; each step ascends the attack loss (self-training
    labels on non-training nodes) with step ``lr/√(t+1)`` and projects onto
    ``Σs ≤ budget``. ``num_samples`` Bernoulli(s) draws are then scored and
    the best feasible one is applied.
    """
    budget = _as_budget(budget)
    spec = _attack_spec(graph, model, loss)
    A = graph.adj.to_dense()
    pairs = upper_pairs(graph.n)
    cap = float(budget.max_flips)
    s = np.zeros(len(pairs)) if s_init is None else np.array(s_init, dtype=np.float64)
    trace = []
    for t in range(int(steps)):
        s, value = _ascent(model, graph, spec, A, pairs, s, cap, lr, t)
        trace.append(value)
    chosen, value, fallback = _discretize(model, graph, spec, A, pairs, s, cap, num_samples, stream(seed, "graph/topology_sample"))
    extra = {"loss_trace": trace, "s": s, "sample_loss": value, "fallback": fallback}
    return _topology_result("pgd_topology", graph, A, pairs, chosen, budget, seed, extra, steps=int(steps), loss=loss)


def minmax_topology_attack(
    graph,
    model: GCN,
    budget,
    outer_steps: int = 50,
    inner_model_steps: int = 1,
    steps: int = 100,
    lr: float = 1.0,
    model_lr: float = 0.01,
    num_samples: int = 20,
    loss: str = "ce",
    seed: int = 0,
) -> PerturbedGraph:
    """Min-max variant: the victim keeps training while ``s`` ascends.

    Each of ``outer_steps`` rounds takes ``inner_model_steps`` Adam steps on
    the training loss over the relaxed graph, then one projected ascent step
    on ``s``. The adapted model is then attacked exactly like
    :func:`pgd_topology_attack`, starting from the current ``s``; with
    ``outer_steps=0`` the two coincide.
    """
    budget = _as_budget(budget)
    if int(outer_steps) < 0:
        raise ValueError(f"outer_steps must be >= 0, got {outer_steps}")
    victim = copy.deepcopy(model)
    spec = _attack_spec(graph, model, loss)
    A = graph.adj.to_dense()
    pairs = upper_pairs(graph.n)
    cap = float(budget.max_flips)
    s = np.zeros(len(pairs))
    opt = Adam(victim.parameters(), lr=model_lr, weight_decay=victim.weight_decay)
    y, idx = graph.labels, graph.idx_train
    for t in range(int(outer_steps)):
        An = normalize_adj_tensor(Tensor(_relaxed_adj(A, pairs, s)))
        for _ in range(int(inner_model_steps)):
            for p in victim.parameters():
                p.grad = None
            train_loss = ad.cross_entropy(victim.forward(graph.features, An)[idx], y[idx])
            train_loss.backward()
            opt.step()
        s, _ = _ascent(victim, graph, spec, A, pairs, s, cap, lr, t)
    for p in victim.parameters():
        p.grad = None
    res = pgd_topology_attack(graph, victim, budget, steps, lr, num_samples, loss, seed, s_init=s)
    res.provenance.update({"attack": "minmax_topology", "outer_steps": int(outer_steps)})
    res.extra["adapted_model"] = victim
    return res


# ---------------------------------------------------------------------------
# DICE


def dice(graph, budget, seed: int = 0) -> PerturbedGraph:
    """Delete same-label edges, insert cross-label edges, at random.

    Each flip picks deletion or insertion with probability 1/2, falling back
    to the other pool when one is empty.
    """
    budget = _as_budget(budget)
    rng = stream(seed, "graph/dice")
    labels = graph.labels
    pairs = upper_pairs(graph.n)
    same = labels[pairs[:, 0]] == labels[pairs[:, 1]]
    A = graph.adj.to_dense()
    present = A[pairs[:, 0], pairs[:, 1]] == 1
    internal = list(np.flatnonzero(same & present))
    external = list(np.flatnonzero(~same & ~present))
    flips = []
    for _ in range(int(budget.max_flips)):
        delete = rng.random() < 0.5
        if delete and not internal:
            delete = False
        elif not delete and not external:
            delete = True
        pool = internal if delete else external
        if not pool:
            break
        k = pool.pop(int(rng.integers(len(pool))))
        i, j = (int(v) for v in pairs[k])
        flips.append((i, j, -1 if delete else 1))
    return PerturbedGraph(
        apply_flips(graph, flips),
        flips,
        provenance={"attack": "dice", "budget": int(budget.max_flips), "seed": int(seed)},
        shortfall=int(budget.max_flips) - len(flips),
    )
