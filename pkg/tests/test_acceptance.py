"""Acceptance suite: one test per criterion, each emitting a single PASS/FAIL line.

Run ``python tests/test_acceptance.py`` for the bare report, or via pytest
where the lines are repeated in the terminal summary.
"""

import itertools
import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, affine_model, central_difference, rel_error, tiny_graph

from advbench import autodiff as ad
from advbench.attacks import bpda, cw_l2, deepfool, fgsm, lbfgs_attack, nattack, one_pixel, pgd, predict, universal_perturbation
from advbench.autodiff import Tensor
from advbench.cli import main as cli_main
from advbench.data.graphs import make_sbm
from advbench.data.images import make_blobs
from advbench.defenses import (
    AdversarialMLPClassifier,
    DefenseConfig,
    IdentityPreprocessor,
    PreprocessedClassifier,
    adversarial_train,
    lid_heldout_auc,
    robust_accuracy,
    thermometer_encode,
    trades_train,
)
from advbench.graph import (
    GCN,
    GCNJaccard,
    GraphBudget,
    LossSpec,
    TargetSpec,
    dice,
    fga,
    ig_attack,
    jaccard_filter,
    metattack,
    minmax_topology_attack,
    nettack,
    normalize_adj,
    normalize_adj_tensor,
    pgd_topology_attack,
    project_capped_box,
    rnd,
    svd_low_rank,
)
from advbench.graph.gcn import attack_loss_value, margin
from advbench.models import MLPClassifier, build_cnn, build_mlp
from advbench.models.training import train
from advbench.report import check_report

# First-run values of the directional runs (5-seed means); later runs must stay within 2 points.
FROZEN = {
    "pgd_training_gain": 0.6756,
    "lid_auc": 0.9051,
    "metattack_drop": 0.0750,
    "jaccard_gain": 0.0625,
}
TOLERANCE = 0.02
SBM_ACCEPTANCE = dict(block_sizes=(20, 20), p_in=0.15, p_out=0.02, feature_dim=48, feature_p=0.02, feature_signal=0.25)


def verdict(number, title, checks):
    failed = [f"{name} ({detail})" for name, ok, detail in checks if not ok]
    status = "FAIL" if failed else "PASS"
    summary = "; ".join(failed) if failed else "; ".join(f"{name} ({detail})" for name, _, detail in checks)
    line = f"[criterion {number}] {status} {title}: {summary}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert not failed, line


# ---------------------------------------------------------------------------
# 1. autodiff against central differences

_W34 = np.arange(12.0).reshape(3, 4)
_UNARY = {
    "relu": lambda t: (ad.relu(t) * ad.relu(t)).sum(),
    "sigmoid": lambda t: ad.sigmoid(t).sum(),
    "tanh": lambda t: (ad.tanh(t) * t).sum(),
    "exp": lambda t: ad.exp(t).mean(),
    "log": lambda t: ad.log(t * t + 1.0).sum(),
    "softmax": lambda t: (ad.softmax(t) * Tensor(_W34)).sum(),
    "log_softmax": lambda t: (ad.log_softmax(t) * Tensor(_W34)).sum(),
    "cross_entropy": lambda t: ad.cross_entropy(t, [0, 3, 1]),
    "kl": lambda t: ad.kl_divergence(t, Tensor(np.linspace(-1, 1, 12).reshape(3, 4))),
    "tsum": lambda t: (ad.tsum(t, 1) * ad.tsum(t, 1)).sum(),
    "mean": lambda t: (ad.mean(t, 0) ** 2.0).sum(),
    "clamp": lambda t: (ad.clamp(t, -0.7, 0.9) * t).sum(),
    "l2_norm": lambda t: ad.l2_norm(t),
    "transpose": lambda t: (t.T @ Tensor(np.ones((3, 2)))).sum(),
    "getitem": lambda t: (t[np.array([0, 2, 2]), np.array([1, 3, 3])] ** 2.0).sum(),
    "reshape": lambda t: (t.reshape(4, 3) @ Tensor(np.arange(6.0).reshape(3, 2))).sum(),
    "power": lambda t: ((t * t + 1.0) ** -0.5).sum(),
    "div": lambda t: (Tensor(np.ones((3, 4))) / (t * t + 1.0)).sum(),
    "add": lambda t: ((t + t * 2.0) * Tensor(_W34)).sum(),
    "sub": lambda t: ((t - Tensor(_W34)) * t).sum(),
    "mul": lambda t: (t * t * Tensor(_W34)).sum(),
    "matmul": lambda t: (t @ Tensor(_W34.T) @ t).sum(),
    "linear": lambda t: ad.linear(t, Tensor(np.ones((4, 2))), Tensor(np.array([0.5, -0.5]))).sum() ** 2.0,
    "concat": lambda t: (ad.concat([t, t * t], axis=1) @ Tensor(np.ones((8, 1)))).sum(),
    "diag": lambda t: (ad.diag(t[0]) @ t.T).sum(),
}


def _fd_case(name, rng):
    """Return (analytic gradient, finite-difference gradient) for one random instance."""
    if name in _UNARY:
        fn = _UNARY[name]
        x0 = rng.uniform(-2, 2, size=(3, 4))
        x = Tensor(x0, requires_grad=True)
        fn(x).backward()
        return x.grad, central_difference(lambda a: float(fn(Tensor(a)).data), x0)
    if name == "conv2d":
        x0 = rng.uniform(-1, 1, size=(2, 2, 4, 4))
        w = Tensor(rng.uniform(-1, 1, size=(3, 2, 3, 3)))
        proj = Tensor(rng.normal(size=(2, 3, 4, 4)))
        f = lambda a: (ad.conv2d(a, w, Tensor(np.ones(3))) * proj).sum()
    elif name == "mlp":
        net = build_mlp((1, 4, 4), (8, 6), 3, seed=int(rng.integers(1 << 30)))
        x0 = rng.uniform(0, 1, size=(4, 1, 4, 4))
        labels = rng.integers(0, 3, 4)
        f = lambda a: ad.cross_entropy(net.forward(a), labels)
    elif name == "cnn":
        net = build_cnn((1, 4, 4), 2, 3, seed=int(rng.integers(1 << 30)))
        x0 = rng.uniform(0, 1, size=(2, 1, 4, 4))
        labels = rng.integers(0, 3, 2)
        f = lambda a: ad.cross_entropy(net.forward(a), labels)
    elif name in ("gcn_features", "gcn_adjacency"):
        g = tiny_graph(7, p=0.5, d=4, seed=int(rng.integers(1 << 30)))
        model = GCN(with_relu=True, seed=int(rng.integers(1 << 30))).initialize(4, 2)
        A0, X0 = g.adj.to_dense(), g.features
        labels = g.labels
        if name == "gcn_features":
            x0 = X0
            f = lambda a: ad.cross_entropy(model.forward(a, normalize_adj_tensor(Tensor(A0))), labels)
        else:
            # a symmetric perturbation S + S^T of the adjacency
            x0 = np.zeros_like(A0)
            f = lambda s: ad.cross_entropy(model.forward(Tensor(X0), normalize_adj_tensor(Tensor(A0) + s + s.T)), labels)
    x = Tensor(x0, requires_grad=True)
    f(x).backward()
    return x.grad, central_difference(lambda a: float(f(Tensor(a)).data), x0)


def test_criterion_1_autodiff_matches_finite_differences():
    kinds = sorted(_UNARY) + ["conv2d", "mlp", "cnn", "gcn_features", "gcn_adjacency"]
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst, covered = 0.0, set()
    for i in range(50):
        kind = kinds[i % len(kinds)]
        got, fd = _fd_case(kind, rng)
        worst = max(worst, rel_error(got, fd))
        covered.add(kind)
    elapsed = time.perf_counter() - start
    verdict(1, "autodiff vs central differences", [
        ("50 instances", covered == set(kinds), f"{len(covered)} primitive/model kinds"),
        ("max relative error <= 1e-5", worst <= 1e-5, f"{worst:.2e}"),
        ("runtime < 10 s", elapsed < 10, f"{elapsed:.2f} s"),
    ])


# ---------------------------------------------------------------------------
# 2. closed-form oracles


def _deepfool_oracle_error(rng):
    W = rng.normal(size=(2, 2))
    b = rng.normal(size=2)
    x = rng.normal(size=(1, 2))
    model = affine_model(W, b)
    y = int(predict(model, x)[0])
    other = 1 - y
    w = W[:, other] - W[:, y]
    f = x[0] @ w + b[other] - b[y]
    r_star = -f * w / (w @ w)
    res = deepfool(model, x, box=None)
    return float(np.abs(res.extra["r_total"][0] - r_star).max())


def _random_hyperplane_victim(rng):
    d = rng.uniform(0.5, 2.0, size=2)
    x = rng.uniform(0.2, 0.4, size=(1, 2))
    dist = rng.uniform(0.1, 0.2)
    # class 1 wins where d.x > c; x sits dist below the plane and its foot point stays in the box
    c = x[0] @ d + dist * np.linalg.norm(d)
    return affine_model(np.column_stack([np.zeros(2), d]), np.array([0.0, -c])), x, dist


def test_criterion_2_closed_form_oracles():
    rng = np.random.default_rng(7)
    df_err = max(_deepfool_oracle_error(rng) for _ in range(20))
    canon = affine_model([[0.0, 3.0], [0.0, 4.0]], [0.0, 0.0])
    canon_err = float(np.abs(deepfool(canon, np.array([[1.0, 1.0]]), box=None).extra["r_total"][0] - [-0.84, -1.12]).max())
    cw_rel, lb_rel = [], []
    for _ in range(4):
        model, x, dist = _random_hyperplane_victim(rng)
        c = cw_l2(model, x, [0], target=1, c_init=0.1, line_search_steps=8, inner_steps=300, lr=0.01)
        lb = lbfgs_attack(model, x, [0], target=1)
        cw_rel.append(abs(c.perturbation_norm[0] - dist) / dist if c.success[0] else np.inf)
        lb_rel.append(abs(lb.perturbation_norm[0] - dist) / dist if lb.success[0] else np.inf)
    verdict(2, "closed-form oracles", [
        ("deepfool one step = -f w/|w|^2", max(df_err, canon_err) <= 1e-9, f"max abs error {max(df_err, canon_err):.1e}"),
        ("cw l2 within 10% of hyperplane distance", max(cw_rel) <= 0.10, f"worst {max(cw_rel):.3f}"),
        ("lbfgs l2 within 10% of hyperplane distance", max(lb_rel) <= 0.10, f"worst {max(lb_rel):.3f}"),
    ])


# ---------------------------------------------------------------------------
# 3. brute-force equivalence


def _grid_projection(s, cap):
    s = np.asarray(s, dtype=float)
    clipped = np.clip(s, 0, 1)
    if clipped.sum() <= cap:
        return clipped
    grid = np.linspace(s.min() - 1, s.max(), 200_001)
    sums = np.clip(s[None, :] - grid[:, None], 0, 1).sum(1)
    k = np.argmin(np.abs(sums - cap))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    for _ in range(200):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if np.clip(s - mid, 0, 1).sum() > cap else (lo, mid)
    return np.clip(s - hi, 0, 1)


def _one_pixel_gap(seed):
    model = build_mlp((1, 2, 2), (6,), 2, seed=seed)
    x = np.random.default_rng(seed).integers(0, 2, (1, 1, 2, 2)).astype(np.float64)
    y = predict(model, x)
    best = np.inf
    for (r, c), v in itertools.product(itertools.product(range(2), range(2)), (0.0, 1.0)):
        img = x.copy()
        img[0, 0, r, c] = v
        best = min(best, ad.softmax_np(model.logits(img))[0, y[0]])
    res = one_pixel(model, x, y, pixel_count=1, de_pop=10, de_iters=10, values=(0.0, 1.0), early_stop=False, seed=seed)
    return abs(ad.softmax_np(model.logits(res.x_adv))[0, y[0]] - best)


def _linear_margin(graph, model, u, label):
    M = normalize_adj(graph.adj).toarray()
    z = M @ M @ graph.features @ model.W0_.data @ model.W1_.data
    return float(margin(z[[u]], np.array([label]))[0])


def test_criterion_3_brute_force_equivalence():
    pix = max(_one_pixel_gap(s) for s in range(5))

    rng = np.random.default_rng(3)
    proj = 0.0
    for _ in range(20):
        s = rng.uniform(-2, 3, size=rng.integers(1, 12))
        cap = rng.uniform(0, 6)
        proj = max(proj, float(np.abs(project_capped_box(s, cap) - _grid_projection(s, cap)).max()))

    net_gap = 0.0
    for seed in range(10):
        g = tiny_graph(8, p=0.4, d=5, seed=seed)
        m = GCN(with_relu=False, seed=seed).fit(g)
        u = 5
        t = TargetSpec.for_node(g, u)
        r = nettack(g, m, t, GraphBudget(1), unnoticeable=False)
        exhaustive = min(_linear_margin(g.with_adj(g.adj.flip([(min(v, u), max(v, u))])), m, u, t.label) for v in range(8) if v != u)
        net_gap = max(net_gap, abs(r.extra["margins"][0] - exhaustive))

    hits, trials = 0, 100
    for seed in range(trials):
        g = tiny_graph(5, p=0.5, d=3, seed=seed, train=[0, 1, 3])
        m = GCN(seed=seed).fit(g)
        spec = LossSpec([2], [int(g.labels[2])], "cw")
        base = attack_loss_value(m, g, spec)
        pairs = [(min(v, 2), max(v, 2)) for v in range(5) if v != 2]
        gains = [attack_loss_value(m, g, spec, adj=g.adj.flip([p])) - base for p in pairs]
        r = fga(g, m, TargetSpec(2, int(g.labels[2]), "cw"), GraphBudget(1))
        hits += bool(r.flips) and r.flips[0][:2] == pairs[int(np.argmax(gains))]

    svd_gap = 0.0
    for seed in range(20):
        n = int(rng.integers(2, 11))
        k = int(rng.integers(1, n + 1))
        A = tiny_graph(n, p=0.5, seed=seed).adj.to_dense()
        w, V = np.linalg.eigh(A)
        keep = np.argsort(-np.abs(w))[:k]
        best = np.linalg.norm(A - (V[:, keep] * w[keep]) @ V[:, keep].T)
        svd_gap = max(svd_gap, abs(np.linalg.norm(A - svd_low_rank(A, k)) - best))

    verdict(3, "brute-force equivalence", [
        ("one_pixel = exhaustive on 2x2 binary", pix <= 1e-15, f"max gap {pix:.1e}"),
        ("capped l1 projection vs grid oracle <= 1e-6", proj <= 1e-6, f"{proj:.1e}"),
        ("nettack first flip exact", net_gap <= 1e-10, f"max gap {net_gap:.1e}"),
        ("FGA first flip agreement >= 80%", hits / trials >= 0.8, f"{hits}/{trials}"),
        ("rank-k error vs eigendecomposition <= 1e-6", svd_gap <= 1e-6, f"{svd_gap:.1e}"),
    ])


# ---------------------------------------------------------------------------
# 4. reduction identities


def _same_weights(a, b):
    return all(np.array_equal(u, v) for u, v in zip(a.get_weights(), b.get_weights()))


def test_criterion_4_reduction_identities():
    tr, te = make_blobs(40, 3, separation=0.6, noise=0.1, seed=2).train_test_split(0.3, seed=2)
    clf = MLPClassifier((16,), epochs=5, seed=0).fit(tr.images, tr.labels)
    x, y = te.images, te.labels

    pgd_fgsm = np.array_equal(pgd(clf, x, y, eps=0.1, alpha=0.1, steps=1).x_adv, fgsm(clf, x, y, eps=0.1).x_adv)

    fresh = lambda: build_mlp(tr.image_shape, (16,), 3, seed=0)
    a, b = fresh(), fresh()
    adversarial_train(a, tr.images, tr.labels, DefenseConfig(eps=0.1, epochs=3, seed=1), "fgsm")
    adversarial_train(b, tr.images, tr.labels, DefenseConfig(eps=0.1, epochs=3, seed=1, random_start=False), "fast")
    fast_fgsm = _same_weights(a, b)

    cfg = DefenseConfig(eps=0.2, trades_beta=0.0, epochs=3, steps=3, seed=2)
    a, b = fresh(), fresh()
    train(a, tr.images, tr.labels, cfg.train_config())
    trades_train(b, tr.images, tr.labels, cfg)
    trades_plain = _same_weights(a, b)

    pipe = PreprocessedClassifier.from_fitted(IdentityPreprocessor(), clf)
    kw = dict(eps=0.1, alpha=0.02, steps=4, random_start=True, seed=9)
    bpda_pgd = np.array_equal(bpda(pipe, x, y, **kw).x_adv, pgd(clf, x, y, **kw).x_adv)

    g = make_sbm((15, 15), 0.3, 0.03, seed=1)
    victim = GCN(seed=1).fit(g)
    p = pgd_topology_attack(g, victim, 5, steps=30, seed=3)
    q = minmax_topology_attack(g, victim, 5, outer_steps=0, steps=30, seed=3)
    minmax_pgd = p.flips == q.flips and np.array_equal(p.extra["s"], q.extra["s"])

    zero = {
        "fgsm": fgsm(clf, x, y, eps=0.0),
        "pgd": pgd(clf, x, y, eps=0.0, random_start=True),
        "bpda": bpda(pipe, x, y, eps=0.0, steps=3),
        "nattack": nattack(clf, x[:5], y[:5], eps=0.0, max_iters=3),
        "universal": universal_perturbation(clf, x, y, eps=0.0),
    }
    unchanged = [k for k, r in zero.items() if not np.array_equal(r.x_adv, x[: len(r.x_adv)])]

    verdict(4, "reduction identities", [
        ("pgd(1 step) = fgsm", pgd_fgsm, "bit-exact"),
        ("fast(no random start) = fgsm training", fast_fgsm, "bit-exact"),
        ("trades(beta=0) = plain training", trades_plain, "bit-exact"),
        ("bpda(identity) = pgd", bpda_pgd, "bit-exact"),
        ("min-max(outer_steps=0) = pgd topology", minmax_pgd, "bit-exact"),
        ("eps=0 leaves x unchanged", not unchanged, f"changed: {unchanged}" if unchanged else "5 attacks"),
    ])


# ---------------------------------------------------------------------------
# 5. thermometer encoding


def test_criterion_5_thermometer_encoding():
    code = "".join(str(int(b)) for b in thermometer_encode(np.array(0.66), 10))
    grid = np.linspace(0, 1, 1001)
    codes = thermometer_encode(grid, 10)
    verdict(5, "thermometer encoding", [
        ("tau(0.66) at l=10", code == "1111110000", code),
        ("prefix property on 0.001 grid", bool(np.all(np.diff(codes, axis=1) <= 0)), "1001 values"),
        ("monotone on 0.001 grid", bool(np.all(np.diff(codes, axis=0) >= 0)), "1001 values"),
    ])


# ---------------------------------------------------------------------------
# 6. directional robustness runs


def _image_runs():
    gains, aucs = [], []
    for s in range(5):
        tr, te = make_blobs(150, 3, separation=0.6, noise=0.1, seed=s).train_test_split(0.3, seed=s)
        nat = MLPClassifier((32,), epochs=20, seed=s).fit(tr.images, tr.labels)
        rob = AdversarialMLPClassifier((32,), flavor="pgd", eps=0.2, epochs=20, seed=s).fit(tr.images, tr.labels)
        gains.append(robust_accuracy(rob.network_, te.images, te.labels, 0.2) - robust_accuracy(nat.network_, te.images, te.labels, 0.2))
        x_adv = pgd(nat, te.images, te.labels, eps=0.3, alpha=0.075, steps=10).x_adv
        aucs.append(lid_heldout_auc(nat, te.images, x_adv, seed=s)[1])
    return float(np.mean(gains)), float(np.mean(aucs))


def _graph_runs():
    drops, jgains = [], []
    for s in range(5):
        g = make_sbm(seed=s, **SBM_ACCEPTANCE)
        poisoned = metattack(g, GraphBudget.fraction_of_edges(g, 0.05), seed=s).graph
        clean_acc = GCN(seed=s).fit(g).score(g)
        plain = GCN(seed=s).fit(poisoned).score(poisoned)
        drops.append(clean_acc - plain)
        jgains.append(GCNJaccard(seed=s).fit(poisoned).score(poisoned) - plain)
    return float(np.mean(drops)), float(np.mean(jgains))


def _frozen(key, value):
    return abs(value - FROZEN[key]) <= TOLERANCE


def test_criterion_6_directional_robustness():
    t0 = time.perf_counter()
    gain, auc = _image_runs()
    t1 = time.perf_counter()
    drop, jgain = _graph_runs()
    t2 = time.perf_counter()
    verdict(6, "directional robustness runs (5-seed means)", [
        ("pgd training gain >= 20 points", gain >= 0.20, f"{gain:.4f}"),
        ("metattack 5% drop >= 5 points", drop >= 0.05, f"{drop:.4f}"),
        ("gcn-jaccard beats plain gcn on metattack graph", jgain > 0, f"+{jgain:.4f}"),
        ("LID AUC >= 0.8 on pgd(eps=0.3)", auc >= 0.8, f"{auc:.4f}"),
        ("within 2 points of frozen baselines", all(_frozen(k, v) for k, v in
            [("pgd_training_gain", gain), ("lid_auc", auc), ("metattack_drop", drop), ("jaccard_gain", jgain)]), "4 values"),
        ("each run <= 5 min", max(t1 - t0, t2 - t1) <= 300, f"{t1 - t0:.1f} s / {t2 - t1:.1f} s"),
    ])


# ---------------------------------------------------------------------------
# 7. integrity


def _image_attack_outputs(clf, x, y):
    eps = 0.2
    out = {
        "fgsm": (fgsm(clf, x, y, eps=eps), eps),
        "pgd": (pgd(clf, x, y, eps=eps, alpha=0.05, steps=10, random_start=True), eps),
        "bpda": (bpda(PreprocessedClassifier.from_fitted(IdentityPreprocessor(), clf), x, y, eps=eps, alpha=0.05, steps=10), eps),
        "nattack": (nattack(clf, x, y, eps=eps, max_iters=20), eps),
        "universal": (universal_perturbation(clf, x, y, norm="linf", eps=eps, max_passes=2), eps),
        "lbfgs": (lbfgs_attack(clf, x, y, target=(y + 1) % 3, outer_bisection_steps=5, inner_steps=30), None),
        "cw": (cw_l2(clf, x, y, line_search_steps=3, inner_steps=50), None),
        "deepfool": (deepfool(clf, x, y), None),
    }
    return out


def _graph_ok(clean, result, budget):
    A = result.adj.to_dense()
    result.validate(clean, budget)
    return bool(np.array_equal(A, A.T) and np.all(np.diag(A) == 0) and set(np.unique(A)) <= {0.0, 1.0})


def test_criterion_7_integrity(tmp_path):
    tr, te = make_blobs(40, 3, separation=0.6, noise=0.1, seed=4).train_test_split(0.3, seed=4)
    clf = MLPClassifier((16,), epochs=10, seed=0).fit(tr.images, tr.labels)
    x, y = te.images[:8], te.labels[:8]
    bad_image = []
    for name, (res, eps) in _image_attack_outputs(clf, x, y).items():
        in_box = res.x_adv.min() >= 0 and res.x_adv.max() <= 1
        in_ball = eps is None or np.abs(res.x_adv - x).max() <= eps + 1e-12
        if not (in_box and in_ball):
            bad_image.append(name)
    op = one_pixel(clf, x, y, pixel_count=2, de_pop=10, de_iters=5)
    changed = np.any(op.x_adv != x, axis=1).reshape(len(x), -1).sum(1)
    if not (np.all(changed <= 2) and op.x_adv.min() >= 0 and op.x_adv.max() <= 1):
        bad_image.append("one_pixel")

    g = make_sbm((15, 15), 0.3, 0.03, seed=5)
    surrogate = GCN(with_relu=False, seed=5).fit(g)
    victim = GCN(seed=5).fit(g)
    target = TargetSpec.for_node(g, int(g.idx_test[0]))
    budget = 4
    results = {
        "fga": fga(g, surrogate, target, GraphBudget(budget)),
        "nettack": nettack(g, surrogate, target, GraphBudget(budget)),
        "ig_attack": ig_attack(g, surrogate, target, GraphBudget(budget)),
        "rnd": rnd(g, target, GraphBudget(budget), seed=5),
        "metattack": metattack(g, budget, inner_steps=20, seed=5),
        "pgd_topology": pgd_topology_attack(g, victim, budget, steps=20, seed=5),
        "minmax_topology": minmax_topology_attack(g, victim, budget, outer_steps=3, steps=20, seed=5),
        "dice": dice(g, budget, seed=5),
    }
    bad_graph = [k for k, r in results.items() if not _graph_ok(g, r, budget)]
    filtered = jaccard_filter(g)
    if not _graph_ok(g, filtered, None):
        bad_graph.append("jaccard_filter")

    reports_ok, identical = True, True
    assert cli_main(["train", "--model", "mlp", "--seed", "3", "--output", str(tmp_path)]) == 0
    blobs = {}
    for run in ("a", "b"):
        out = tmp_path / run
        out.mkdir()
        (out / "model-mlp.advb").write_bytes((tmp_path / "model-mlp.advb").read_bytes())
        assert cli_main(["evaluate", "--attack_method", "fgsm,pgd", "--model", "mlp", "--eps", "0.2", "--seed", "3", "--output", str(out)]) == 0
        assert cli_main(["graph-attack", "--attack_method", "dice", "--seed", "3", "--output", str(out)]) == 0
        for d in (out / "evaluate", out / "graph-dice"):
            reports_ok &= check_report(d)
        blobs[run] = [(out / d / f).read_bytes() for d in ("evaluate", "graph-dice") for f in ("rows.csv", "report.json")]
    identical = blobs["a"] == blobs["b"]

    verdict(7, "integrity suite", [
        ("image outputs respect box/budget", not bad_image, f"violations: {bad_image}" if bad_image else "9 attacks"),
        ("graph outputs symmetric/binary/zero-diagonal/in budget", not bad_graph, f"violations: {bad_graph}" if bad_graph else "8 attacks + filter"),
        ("report aggregates recompute from rows", reports_ok, "evaluate + graph-attack"),
        ("same seed gives byte-identical CLI reports", identical, "rows.csv + report.json"),
    ])


# ---------------------------------------------------------------------------
# 8. black-box purity


def test_criterion_8_black_box_purity():
    tr, te = make_blobs(40, 3, separation=0.6, noise=0.1, seed=6).train_test_split(0.3, seed=6)
    clf = MLPClassifier((16,), epochs=5, seed=0).fit(tr.images, tr.labels)
    x, y = te.images[:4], te.labels[:4]
    with ad.backward_probe() as probe:
        op = one_pixel(clf, x, y, pixel_count=3, de_pop=10, de_iters=5)
        na = nattack(clf, x, y, eps=0.2, max_iters=10)
    with ad.backward_probe() as control:
        fgsm(clf, x, y, eps=0.1)
    verdict(8, "black-box purity", [
        ("one_pixel + nattack record zero backward passes", probe.count == 0, f"{probe.count} backward passes, {op.queries + na.queries} queries"),
        ("probe is live (fgsm counted)", control.count > 0, f"{control.count}"),
    ])


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    tests = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    failures = 0
    for fn in tests:
        try:
            if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                with tempfile.TemporaryDirectory() as d:
                    fn(Path(d))
            else:
                fn()
        except AssertionError:
            failures += 1
    sys.exit(1 if failures else 0)
