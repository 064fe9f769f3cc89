"""Minimum-distortion targeted attacks: box-constrained L-BFGS and CW-L2."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from .. import autodiff as ad
from ..autodiff import Tensor
from .base import (
    Attack,
    AttackError,
    _clear_parameter_grads,
    check_attack_inputs,
    finish,
    logits_of,
    num_classes_of,
    predict,
    target_array,
)


def cw_hinge(logits, t, kappa: float = 0.0, targeted: bool = True) -> np.ndarray:
    """Row-wise ``max(max_{i≠t} Z_i − Z_t, −κ)`` (targeted) or
    ``max(Z_y − max_{i≠y} Z_i, −κ)`` (untargeted, ``t`` = true label)."""
    Z = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    t = np.broadcast_to(np.asarray(t, dtype=np.int64), (Z.shape[0],))
    rows = np.arange(Z.shape[0])
    others = Z.copy()
    others[rows, t] = -np.inf
    gap = others.max(axis=1) - Z[rows, t]
    return np.maximum(gap if targeted else -gap, -kappa)


def _cw_hinge_tensor(logits: Tensor, t: np.ndarray, kappa: float, targeted: bool) -> Tensor:
    rows = np.arange(logits.shape[0])
    others = logits.data.copy()
    others[rows, t] = -np.inf
    j = np.argmax(others, axis=1)
    gap = logits[rows, j] - logits[rows, t]
    return ad.clamp(gap if targeted else -gap, low=-kappa)


# ---------------------------------------------------------------------------
# L-BFGS attack


def _objective(model, z, x, t, c):
    zt = Tensor(z[None], requires_grad=True)
    logits = model.forward(zt)
    diff = zt - Tensor(x[None])
    loss = (diff * diff).sum() * c + ad.cross_entropy(logits, t)
    loss.backward()
    _clear_parameter_grads(model)
    return float(loss.data), zt.grad[0], logits.data[0]


def _objective_value(model, z, x, t, c):
    logits = logits_of(model, z[None])
    ce = float(ad.cross_entropy(Tensor(logits), t).data)
    return c * float(np.sum((z - x) ** 2)) + ce


def _solve_pgd(model, x, t, c, steps, box):
    """Projected gradient descent with Armijo backtracking on the box."""
    z = x.copy()
    step = 1.0
    evals = 0
    for _ in range(int(steps)):
        f, g, _ = _objective(model, z, x, t, c)
        evals += 1
        while True:
            z_new = np.clip(z - step * g, box[0], box[1])
            moved = z - z_new
            if not np.any(moved):
                return z, evals
            if _objective_value(model, z_new, x, t, c) <= f - 1e-4 * float(np.sum(g * moved)):
                break
            step *= 0.5
            if step < 1e-14:
                return z, evals
        z = z_new
        step *= 2.0
    return z, evals


def _solve_lbfgsb(model, x, t, c, steps, box):
    shape = x.shape
    evals = [0]

    def fun(v):
        evals[0] += 1
        f, g, _ = _objective(model, v.reshape(shape), x, t, c)
        return f, g.reshape(-1)

    res = minimize(
        fun,
        x.reshape(-1),
        jac=True,
        method="L-BFGS-B",
        bounds=[box] * x.size,
        options={"maxiter": int(steps)},
    )
    return res.x.reshape(shape), evals[0]


def lbfgs_attack(
    model,
    x,
    y,
    target,
    c_range=(1e-3, 1e3),
    outer_bisection_steps=20,
    inner_steps=100,
    solver="pgd",
    box=(0.0, 1.0),
):
    """Targeted minimum-l2 attack: minimize ``c‖x'−x‖² + CE(x', t)`` on the box.

    Bisection (geometric) over ``c`` keeps the largest ``c`` whose solution
    is classified as ``t``; the successful ``x'`` closest to ``x`` is
    returned, or ``x`` itself when no probe succeeds.
    """
    if solver not in ("pgd", "lbfgsb"):
        raise AttackError(f"solver must be 'pgd' or 'lbfgsb', got {solver!r}")
    x, y = check_attack_inputs(model, x, y, box)
    t = target_array(target, len(y))
    if t is None:
        raise AttackError("lbfgs_attack is targeted; pass a target class")
    k = num_classes_of(model, x)
    if t.min() < 0 or t.max() >= k:
        raise AttackError(f"target outside [0, {k})")
    if np.any(t == y):
        raise AttackError("target class equals the true label")
    lo_c, hi_c = float(c_range[0]), float(c_range[1])
    if not 0 < lo_c <= hi_c:
        raise AttackError(f"c_range must satisfy 0 < low <= high, got {c_range}")
    solve = _solve_pgd if solver == "pgd" else _solve_lbfgsb
    x_adv = x.copy()
    grad_evals = 0
    initial = predict(model, x)
    best_c = np.full(len(y), np.nan)
    for i in range(len(y)):
        if initial[i] == t[i]:
            continue
        lo, hi = lo_c, hi_c
        best = np.inf
        for _ in range(int(outer_bisection_steps)):
            c = float(np.sqrt(lo * hi))
            z, evals = solve(model, x[i], t[i : i + 1], c, inner_steps, box)
            grad_evals += evals
            if predict(model, z[None])[0] == t[i]:
                dist = float(np.sum((z - x[i]) ** 2))
                if dist < best:
                    best, x_adv[i], best_c[i] = dist, z, c
                lo = c
            else:
                hi = c
    result = finish(model, x, x_adv, y, t, "l2", iterations=int(outer_bisection_steps), grad_evals=grad_evals)
    result.extra["c"] = best_c
    return result


# ---------------------------------------------------------------------------
# Carlini-Wagner L2


def cw_l2(
    model,
    x,
    y,
    target=None,
    confidence_kappa=0.0,
    c_init=1e-2,
    line_search_steps=9,
    inner_steps=200,
    lr=0.05,
    box=(0.0, 1.0),
):
    """CW-L2 with the box handled by ``x' = low + (high−low)(tanh(w)+1)/2``.

    Adam descends ``‖x'−x‖² + c·f(x')`` in ``w``; per sample, ``c`` doubles
    until a success brackets it, then bisects. The smallest-distortion
    success seen anywhere is returned. ``target=None`` runs the untargeted
    hinge against the true label.
    """
    x, y = check_attack_inputs(model, x, y, box)
    t = target_array(target, len(y))
    targeted = t is not None
    ref = t if targeted else y
    low, high = box
    span = high - low
    n = len(y)
    c = np.full(n, float(c_init))
    c_lo = np.zeros(n)
    c_hi = np.full(n, np.inf)
    best_l2 = np.full(n, np.inf)
    x_adv = x.copy()
    unit = np.clip((x - low) / span * 2 - 1, -1 + 1e-6, 1 - 1e-6)
    w0 = np.arctanh(unit)
    grad_evals = 0
    trace = []
    for _ in range(int(line_search_steps)):
        w = w0.copy()
        m = np.zeros_like(w)
        v = np.zeros_like(w)
        succeeded = np.zeros(n, dtype=bool)
        for it in range(1, int(inner_steps) + 1):
            wt = Tensor(w, requires_grad=True)
            xp = ad.tanh(wt) * (span / 2) + (low + span / 2)
            diff = xp - Tensor(x)
            l2 = ad.tsum(ad.reshape(diff * diff, (n, -1)), 1)
            logits = model.forward(xp)
            hinge = _cw_hinge_tensor(logits, ref, confidence_kappa, targeted)
            loss = (l2 + hinge * Tensor(c)).sum()
            loss.backward()
            _clear_parameter_grads(model)
            grad_evals += 1
            g = wt.grad
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            w = w - lr * (m / (1 - 0.9**it)) / (np.sqrt(v / (1 - 0.999**it)) + 1e-8)
            pred = np.argmax(logits.data, axis=1)
            ok = pred == ref if targeted else pred != ref
            d = l2.data
            better = ok & (d < best_l2)
            best_l2[better] = d[better]
            x_adv[better] = xp.data[better]
            succeeded |= ok
        trace.append(float(loss.data))
        c_hi = np.where(succeeded, np.minimum(c_hi, c), c_hi)
        c_lo = np.where(succeeded, c_lo, np.maximum(c_lo, c))
        c = np.where(np.isfinite(c_hi), (c_lo + c_hi) / 2, c * 2)
    # already-adversarial inputs keep zero distortion
    start_ok = predict(model, x)
    start_ok = start_ok == ref if targeted else start_ok != ref
    x_adv[start_ok] = x[start_ok]
    x_adv = np.clip(x_adv, low, high)
    return finish(model, x, x_adv, y, t, "l2", iterations=int(line_search_steps) * int(inner_steps), grad_evals=grad_evals, loss_trace=trace)


class LBFGSAttack(Attack):
    attack_fn = staticmethod(lbfgs_attack)

    def __init__(self, target=None, c_range=(1e-3, 1e3), outer_bisection_steps=20, inner_steps=100, solver="pgd"):
        self.target = target
        self.c_range = c_range
        self.outer_bisection_steps = outer_bisection_steps
        self.inner_steps = inner_steps
        self.solver = solver


class CarliniWagnerL2(Attack):
    attack_fn = staticmethod(cw_l2)

    def __init__(self, target=None, confidence_kappa=0.0, c_init=1e-2, line_search_steps=9, inner_steps=200, lr=0.05):
        self.target = target
        self.confidence_kappa = confidence_kappa
        self.c_init = c_init
        self.line_search_steps = line_search_steps
        self.inner_steps = inner_steps
        self.lr = lr
