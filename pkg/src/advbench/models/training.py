"""Minibatch training loop and first-order optimizers."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .. import autodiff as ad
from ..rng import stream
from ..validation import check_labels


class TrainingError(RuntimeError):
    """Raised when a loss turns NaN/Inf; the message names the step."""


OPTIMIZERS = ("sgd", "sgd_momentum")


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.1
    seed: int = 0
    optimizer: str = "sgd"

    def __post_init__(self):
        if int(self.epochs) < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainReport:
    losses: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)
    robust_accuracy: list = field(default_factory=list)

    @property
    def final_accuracy(self) -> float:
        return self.accuracy[-1] if self.accuracy else float("nan")

    def to_dict(self):
        return {
            "losses": list(self.losses),
            "accuracy": list(self.accuracy),
            "robust_accuracy": list(self.robust_accuracy),
            "final_accuracy": self.final_accuracy,
        }


class SGD:
    def __init__(self, params, lr: float, momentum: float = 0.0, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self._velocity = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for p, v in zip(self.params, self._velocity):
            if p.grad is None:
                continue
            g = p.grad + self.weight_decay * p.data if self.weight_decay else p.grad
            if self.momentum:
                v *= self.momentum
                v += g
                g = v
            p.data = p.data - self.lr * g


class Adam:
    def __init__(self, params, lr: float = 0.01, betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad + self.weight_decay * p.data if self.weight_decay else p.grad
            m *= self.b1
            m += (1 - self.b1) * g
            v *= self.b2
            v += (1 - self.b2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(params, cfg: TrainConfig):
    momentum = 0.9 if cfg.optimizer == "sgd_momentum" else 0.0
    return SGD(params, cfg.learning_rate, momentum=momentum)


def cross_entropy_loss(model, xb, yb, rng):
    return ad.cross_entropy(model.forward(xb), yb)


def accuracy(model, X, y) -> float:
    return float(np.mean(model.predict(X) == y)) if len(y) else float("nan")


def train(
    model,
    X,
    y,
    cfg: TrainConfig,
    X_eval=None,
    y_eval=None,
    loss_fn: Callable | None = None,
    robust_eval: Callable | None = None,
) -> TrainReport:
    """Train ``model`` in place with minibatch SGD.

    ``loss_fn(model, xb, yb, rng)`` builds the minibatch loss (plain
    cross-entropy by default); ``rng`` is the run's attack stream, kept apart
    from the shuffling stream so inner attacks never perturb batch order.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise ValueError("cannot train on an empty dataset")
    y = check_labels(y, X.shape[0], model.num_classes)
    if X_eval is None:
        X_eval, y_eval = X, y
    loss_fn = loss_fn or cross_entropy_loss
    shuffle_rng = stream(cfg.seed, "train/shuffle")
    attack_rng = stream(cfg.seed, "train/attack")
    opt = make_optimizer(model.parameters(), cfg)
    report = TrainReport()
    n = X.shape[0]
    for epoch in range(int(cfg.epochs)):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for b, start in enumerate(range(0, n, int(cfg.batch_size))):
            idx = order[start : start + int(cfg.batch_size)]
            model.zero_grad()
            loss = loss_fn(model, X[idx], y[idx], attack_rng)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {b}")
            loss.backward()
            opt.step()
            total += value * len(idx)
        report.losses.append(total / n)
        report.accuracy.append(accuracy(model, X_eval, y_eval))
        if robust_eval is not None:
            report.robust_accuracy.append(float(robust_eval(model)))
    model.zero_grad()
    return report
