"""Gradient-sign attacks under an l-inf budget: FGSM, PGD and BPDA."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..rng import stream
from .base import (
    Attack,
    AttackError,
    check_attack_inputs,
    clip_box,
    finish,
    loss_gradient,
    project_linf,
    target_array,
)


def fgsm_step(x, grad, eps, box=(0.0, 1.0), targeted=False) -> np.ndarray:
    direction = -np.sign(grad) if targeted else np.sign(grad)
    return clip_box(x + eps * direction, box)


def fgsm(model, x, y, eps=0.1, target=None, box=(0.0, 1.0)):
    """Single signed-gradient step of size ``eps``, clipped to the box.

    Untargeted steps ascend the loss of ``y``; targeted steps descend the
    loss of ``target``.
    """
    if eps < 0:
        raise AttackError(f"eps must be >= 0, got {eps}")
    x, y = check_attack_inputs(model, x, y, box)
    t = target_array(target, len(y))
    grad, _ = loss_gradient(model, x, y if t is None else t)
    x_adv = fgsm_step(x, grad, eps, box, targeted=t is not None)
    return finish(model, x, x_adv, y, t, "linf", iterations=1, grad_evals=1)


def _iterate(model, x, y, eps, alpha, steps, random_start, seed, target, box, forward, stream_name):
    if eps < 0 or alpha < 0:
        raise AttackError(f"eps and alpha must be >= 0, got eps={eps}, alpha={alpha}")
    if steps < 1:
        raise AttackError(f"steps must be >= 1, got {steps}")
    x, y = check_attack_inputs(model, x, y, box)
    t = target_array(target, len(y))
    labels = y if t is None else t
    x_adv = x.copy()
    if random_start:
        rng = stream(seed, stream_name)
        x_adv = clip_box(x + rng.uniform(-eps, eps, size=x.shape), box)
    trace = []
    for _ in range(int(steps)):
        grad, logits = loss_gradient(model, x_adv, labels, forward=forward)
        trace.append(float(ad.cross_entropy(ad.Tensor(logits), labels).data))
        stepped = fgsm_step(x_adv, grad, alpha, box=None, targeted=t is not None)
        # ball first, then the data box
        x_adv = clip_box(project_linf(stepped, x, eps), box)
    return finish(model, x, x_adv, y, t, "linf", iterations=int(steps), grad_evals=int(steps), loss_trace=trace)


def pgd(model, x, y, eps=0.1, alpha=0.01, steps=40, random_start=False, seed=0, target=None, box=(0.0, 1.0)):
    """Iterated FGSM with projection onto the l-inf ball then the box."""
    return _iterate(model, x, y, eps, alpha, steps, random_start, seed, target, box, None, "attack/pgd")


def bpda(model, x, y, eps=0.1, alpha=0.01, steps=40, random_start=False, seed=0, target=None, box=(0.0, 1.0)):
    """PGD through a non-differentiable preprocessing stage.

    ``model`` must expose a fitted ``preprocessor_`` (with ``transform``) and
    ``classifier_``, or the unsuffixed attributes. The forward pass runs the true preprocessor; the backward
    pass treats it as the identity (straight-through).
    """
    pre = getattr(model, "preprocessor_", None) or getattr(model, "preprocessor", None)
    clf = getattr(model, "classifier_", None) or getattr(model, "classifier", None)
    if pre is None or clf is None:
        raise AttackError("bpda needs a pipeline declaring a preprocessor; use pgd for plain models")

    def forward(xt):
        return clf.forward(ad.straight_through(xt, pre.transform, name="bpda_identity"))

    # same random-start stream as pgd so an identity preprocessor reproduces pgd exactly
    return _iterate(model, x, y, eps, alpha, steps, random_start, seed, target, box, forward, "attack/pgd")


class FGSM(Attack):
    attack_fn = staticmethod(fgsm)

    def __init__(self, eps=0.1, target=None):
        self.eps = eps
        self.target = target


class PGD(Attack):
    attack_fn = staticmethod(pgd)

    def __init__(self, eps=0.1, alpha=0.01, steps=40, random_start=False, seed=0, target=None):
        self.eps = eps
        self.alpha = alpha
        self.steps = steps
        self.random_start = random_start
        self.seed = seed
        self.target = target


class BPDA(PGD):
    attack_fn = staticmethod(bpda)
