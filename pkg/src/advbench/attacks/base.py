"""Shared attack contract: budgets, goals, results and gradient plumbing.

A *model* here is anything with ``forward(x) -> Tensor`` returning logits
``[batch, classes]``: a :class:`~advbench.models.Network`, a fitted
estimator, or a preprocessing pipeline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .. import autodiff as ad
from ..autodiff import Tensor
from ..validation import check_images, check_labels

NORMS = ("l0", "l2", "linf")


@dataclass(frozen=True)
class Budget:
    norm: str = "linf"
    epsilon: float = 0.1
    box: tuple = (0.0, 1.0)

    def __post_init__(self):
        if self.norm not in NORMS:
            raise ValueError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not self.box[0] < self.box[1]:
            raise ValueError(f"box must satisfy low < high, got {self.box}")


@dataclass(frozen=True)
class AttackGoal:
    kind: str = "untargeted"
    target: int | None = None

    @classmethod
    def untargeted(cls):
        return cls()

    @classmethod
    def targeted(cls, t: int):
        return cls("targeted", int(t))

    def check(self, num_classes: int):
        if self.kind == "targeted" and not (0 <= self.target < num_classes):
            raise ValueError(f"target class {self.target} outside [0, {num_classes})")


@dataclass
class AttackResult:
    x_adv: np.ndarray
    success: np.ndarray
    perturbation_norm: np.ndarray
    norm: str = "linf"
    iterations: int = 0
    queries: int = 0
    grad_evals: int = 0
    loss_trace: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def success_rate(self) -> float:
        return float(np.mean(self.success)) if self.success.size else float("nan")

    def __len__(self):
        return self.x_adv.shape[0]


class AttackError(ValueError):
    pass


# ---------------------------------------------------------------------------
# model access


def logits_of(model, x) -> np.ndarray:
    with ad.no_grad():
        return model.forward(Tensor(x)).data


def predict(model, x) -> np.ndarray:
    # np.argmax returns the lowest index among ties
    return np.argmax(logits_of(model, x), axis=1)


def num_classes_of(model, x) -> int:
    n = getattr(model, "num_classes", None)
    return int(n) if n is not None else logits_of(model, x[:1]).shape[1]


def loss_gradient(model, x, labels, forward=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample gradient of cross-entropy w.r.t. the input (one backward).

    Returns ``(grad, logits)``. ``forward`` overrides ``model.forward``.
    """
    xt = Tensor(x, requires_grad=True)
    logits = (forward or model.forward)(xt)
    loss = ad.cross_entropy(logits, labels, reduction="sum")
    loss.backward()
    _clear_parameter_grads(model)
    return xt.grad, logits.data


def _clear_parameter_grads(model, depth=0):
    # attacks must not leave gradients on the victim's parameters
    if model is None or depth > 2:
        return
    if hasattr(model, "zero_grad"):
        model.zero_grad()
    for attr in ("network_", "classifier_", "classifier"):
        _clear_parameter_grads(getattr(model, attr, None), depth + 1)


# ---------------------------------------------------------------------------
# geometry


def clip_box(x, box) -> np.ndarray:
    if box is None:
        return x
    return np.clip(x, box[0], box[1])


def project_linf(x_adv, x, eps) -> np.ndarray:
    return np.clip(x_adv, x - eps, x + eps)


def project_l2(delta, eps) -> np.ndarray:
    flat = delta.reshape(delta.shape[0], -1)
    norms = np.linalg.norm(flat, axis=1)
    scale = np.where(norms > eps, eps / np.maximum(norms, 1e-300), 1.0)
    return delta * scale.reshape((-1,) + (1,) * (delta.ndim - 1))


def perturbation_norms(x_adv, x, norm: str) -> np.ndarray:
    d = (x_adv - x).reshape(x.shape[0], -1)
    if norm == "linf":
        return np.abs(d).max(axis=1) if d.shape[1] else np.zeros(x.shape[0])
    if norm == "l2":
        return np.linalg.norm(d, axis=1)
    if norm == "l0":
        # pixels = spatial positions; a pixel counts once however many channels moved
        if x.ndim == 4:
            moved = np.any(x_adv != x, axis=1)
            return moved.reshape(x.shape[0], -1).sum(axis=1).astype(np.float64)
        return (d != 0).sum(axis=1).astype(np.float64)
    raise ValueError(f"unknown norm {norm!r}")


def success_flags(model, x_adv, y, target=None) -> np.ndarray:
    pred = predict(model, x_adv)
    if target is None:
        return pred != y
    return pred == np.broadcast_to(np.asarray(target), pred.shape)


def check_attack_inputs(model, x, y, box=(0.0, 1.0)):
    x = check_images(x, "x", box=box)
    y = check_labels(y, x.shape[0], None)
    return x, y


def target_array(target, n) -> np.ndarray | None:
    if target is None:
        return None
    return np.broadcast_to(np.asarray(target, dtype=np.int64), (n,)).copy()


def finish(model, x, x_adv, y, target=None, norm="linf", **counts) -> AttackResult:
    success = success_flags(model, x_adv, y, target)
    return AttackResult(
        x_adv=x_adv,
        success=success,
        perturbation_norm=perturbation_norms(x_adv, x, norm),
        norm=norm,
        **counts,
    )


class Attack(BaseEstimator):
    """Estimator-style front end: hyperparameters in ``__init__``,
    ``generate(model, X, y)`` runs the attack function."""

    attack_fn = None

    def generate(self, model, X, y, **overrides) -> AttackResult:
        params = {**self.get_params(), **overrides}
        return type(self).attack_fn(model, X, y, **params)
