"""DeepFool (multi-class linearization) and universal perturbations."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..rng import stream
from .base import (
    Attack,
    AttackError,
    _clear_parameter_grads,
    check_attack_inputs,
    clip_box,
    finish,
    predict,
    project_l2,
)


def _logits_and_jacobian(model, x, classes):
    """Logits of one input and the gradients of the listed logits."""
    grads = []
    logits = None
    for k in classes:
        xt = Tensor(x[None], requires_grad=True)
        out = model.forward(xt)
        out[0, int(k)].backward()
        _clear_parameter_grads(model)
        grads.append(xt.grad[0])
        logits = out.data[0]
    return logits, np.stack(grads)


def _deepfool_one(model, x, max_iter, overshoot, box, candidates):
    x0_logits, _ = _logits_and_jacobian(model, x, [0])
    label = int(np.argmax(x0_logits))
    k_all = len(x0_logits)
    if candidates is not None:
        order = np.argsort(-x0_logits)
        classes = [label] + [int(c) for c in order if c != label][: int(candidates)]
    else:
        classes = [label] + [c for c in range(k_all) if c != label]
    r_total = np.zeros_like(x)
    x_adv = x.copy()
    grad_evals = 1
    it = 0
    while it < max_iter:
        logits, J = _logits_and_jacobian(model, x_adv, classes)
        grad_evals += len(classes)
        if int(np.argmax(logits)) != label:
            break
        w = J[1:] - J[0]
        f = logits[classes[1:]] - logits[label]
        norms = np.sqrt((w.reshape(len(w), -1) ** 2).sum(axis=1))
        ratios = np.abs(f) / np.maximum(norms, 1e-300)
        best = int(np.argmin(ratios))
        # 1e-12 keeps the step from landing exactly on the boundary
        r_i = (ratios[best] + 1e-12) * w[best] / max(norms[best], 1e-300)
        r_total = r_total + r_i
        x_adv = clip_box(x + (1 + overshoot) * r_total, box)
        it += 1
    return x_adv, r_total, it, grad_evals, label


def deepfool(model, x, y=None, max_iter=50, overshoot=0.02, box=(0.0, 1.0), candidates=None):
    """Iteratively step to the nearest linearized decision boundary.

    Each iteration moves towards the closest of the other classes by
    ``|f_k| / ‖w_k‖`` along ``w_k``; the accumulated step is scaled by
    ``1 + overshoot``. ``candidates`` limits the search to that many
    top-scoring classes. ``y`` defaults to the clean predictions.
    """
    if max_iter < 1:
        raise AttackError(f"max_iter must be >= 1, got {max_iter}")
    if overshoot < 0:
        raise AttackError(f"overshoot must be >= 0, got {overshoot}")
    x = np.asarray(x, dtype=np.float64)
    if y is None:
        y = predict(model, x)
    x, y = check_attack_inputs(model, x, y, box)
    x_adv = np.empty_like(x)
    r = np.empty_like(x)
    iters = np.zeros(len(x), dtype=np.int64)
    evals = 0
    for i in range(len(x)):
        x_adv[i], r[i], iters[i], g, _ = _deepfool_one(model, x[i], int(max_iter), overshoot, box, candidates)
        evals += g
    result = finish(model, x, x_adv, y, None, "l2", iterations=int(iters.max(initial=0)), grad_evals=evals)
    result.extra["r_total"] = r
    result.extra["iterations_per_sample"] = iters
    return result


def universal_perturbation(
    model,
    x,
    y,
    norm="l2",
    eps=1.0,
    fooling_target_sigma=0.2,
    max_passes=10,
    deepfool_max_iter=50,
    overshoot=0.02,
    seed=0,
    box=(0.0, 1.0),
):
    """One perturbation ``v`` that fools the model on many inputs.

    Passes over a shuffled ``x``; for each still-correct point, DeepFool
    from ``x+v`` gives an increment, and ``v`` is projected back onto the
    ``eps`` ball. Stops once the fooling rate (measured against ``y``)
    reaches ``1 - fooling_target_sigma`` or after ``max_passes``. The
    returned ``v`` is the best one seen at the end of a pass.
    """
    if norm not in ("l2", "linf"):
        raise AttackError(f"norm must be 'l2' or 'linf', got {norm!r}")
    if eps < 0:
        raise AttackError(f"eps must be >= 0, got {eps}")
    if not 0 <= fooling_target_sigma <= 1:
        raise AttackError(f"fooling_target_sigma must lie in [0, 1], got {fooling_target_sigma}")
    x, y = check_attack_inputs(model, x, y, box)
    if len(x) == 0:
        raise AttackError("universal_perturbation needs at least one sample")
    target_rate = 1.0 - fooling_target_sigma
    rng = stream(seed, "attack/universal")
    v = np.zeros(x.shape[1:])

    def project(u):
        if norm == "l2":
            return project_l2(u[None], eps)[0]
        return np.clip(u, -eps, eps)

    def fool_rate():
        return float(np.mean(predict(model, clip_box(x + v, box)) != y))

    rate = fool_rate()
    best_v, best_rate = v.copy(), rate
    evals = 0
    passes = 0
    trace = [rate]
    while rate < target_rate and passes < max_passes and eps > 0:
        passes += 1
        for i in rng.permutation(len(x)):
            xi = clip_box(x[i] + v, box)
            if predict(model, xi[None])[0] != y[i]:
                continue
            _, r, _, g, _ = _deepfool_one(model, xi, int(deepfool_max_iter), overshoot, None, None)
            evals += g
            v = project(v + (1 + overshoot) * r)
        rate = fool_rate()
        trace.append(rate)
        if rate > best_rate:
            best_v, best_rate = v.copy(), rate
    # passes can undo earlier progress; keep the best pass-end perturbation
    v, rate = best_v, best_rate
    x_adv = clip_box(x + v, box)
    result = finish(model, x, x_adv, y, None, norm, iterations=passes, grad_evals=evals, loss_trace=trace)
    result.extra["perturbation"] = v
    result.extra["fooling_rate"] = rate
    return result


class DeepFool(Attack):
    attack_fn = staticmethod(deepfool)

    def __init__(self, max_iter=50, overshoot=0.02, candidates=None):
        self.max_iter = max_iter
        self.overshoot = overshoot
        self.candidates = candidates


class UniversalPerturbation(Attack):
    attack_fn = staticmethod(universal_perturbation)

    def __init__(self, norm="l2", eps=1.0, fooling_target_sigma=0.2, max_passes=10, deepfool_max_iter=50, overshoot=0.02, seed=0):
        self.norm = norm
        self.eps = eps
        self.fooling_target_sigma = fooling_target_sigma
        self.max_passes = max_passes
        self.deepfool_max_iter = deepfool_max_iter
        self.overshoot = overshoot
        self.seed = seed
