"""Robust training: FGSM / Fast / PGD adversarial training and TRADES."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..attacks.base import clip_box, loss_gradient, project_linf
from ..attacks.gradient import fgsm_step, pgd
from ..models.estimators import MLPClassifier
from ..models.training import TrainConfig, TrainReport, accuracy, train  # noqa: F401

FLAVORS = ("fgsm", "fast", "pgd")


@dataclass
class DefenseConfig:
    """Inner-attack and outer-training settings.

    ``alpha=None`` picks the flavor default (eps for fgsm, 1.25·eps for fast,
    eps/4 for pgd and TRADES); ``random_start=None`` means on for fast only.
    """

    eps: float = 0.2
    alpha: float | None = None
    steps: int = 10
    random_start: bool | None = None
    trades_beta: float = 6.0
    epochs: int = 20
    batch_size: int = 32
    learning_rate: float = 0.1
    optimizer: str = "sgd_momentum"
    seed: int = 0

    def __post_init__(self):
        if not self.eps >= 0:
            raise ValueError(f"eps must be >= 0, got {self.eps}")
        if self.alpha is not None and not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if int(self.steps) < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.trades_beta >= 0:
            raise ValueError(f"trades_beta must be >= 0, got {self.trades_beta}")
        self.train_config()

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.seed, self.optimizer)

    def step_size(self, flavor: str) -> float:
        if self.alpha is not None:
            return float(self.alpha)
        return {"fgsm": 1.0, "fast": 1.25}.get(flavor, 0.25) * self.eps

    def starts_random(self, flavor: str) -> bool:
        return flavor == "fast" if self.random_start is None else bool(self.random_start)

    def to_dict(self):
        return asdict(self)


def _network(model):
    return getattr(model, "network_", model)


def perturb_batch(model, xb, yb, cfg: DefenseConfig, flavor: str, rng) -> np.ndarray:
    """Adversarial counterpart of a minibatch under the current parameters."""
    eps = cfg.eps
    if flavor == "fgsm":
        grad, _ = loss_gradient(model, xb, yb)
        return fgsm_step(xb, grad, eps)
    alpha = cfg.step_size(flavor)
    steps = 1 if flavor == "fast" else int(cfg.steps)
    x_adv = xb
    if cfg.starts_random(flavor):
        x_adv = clip_box(xb + rng.uniform(-eps, eps, size=xb.shape), (0.0, 1.0))
    for _ in range(steps):
        grad, _ = loss_gradient(model, x_adv, yb)
        x_adv = clip_box(project_linf(fgsm_step(x_adv, grad, alpha, box=None), xb, eps), (0.0, 1.0))
    return x_adv


def robust_accuracy(model, X, y, eps, alpha=None, steps=20) -> float:
    """Accuracy under untargeted PGD (no random start)."""
    alpha = eps / 4 if alpha is None else alpha
    res = pgd(model, X, y, eps=eps, alpha=alpha, steps=steps)
    return float(np.mean(~res.success))


def _robust_eval(X_eval, y_eval, cfg, eval_eps):
    if X_eval is None or eval_eps is None:
        return None
    return lambda m: robust_accuracy(m, X_eval, y_eval, eval_eps)


def adversarial_train(model, X, y, cfg: DefenseConfig, flavor="pgd", X_eval=None, y_eval=None, eval_eps=None) -> TrainReport:
    """Train on adversarial minibatches generated against current parameters.

    ``flavor`` is ``fgsm`` (one eps step), ``fast`` (one alpha step from a
    uniform random start) or ``pgd`` (``cfg.steps`` projected steps).
    Robust accuracy per epoch is recorded when ``eval_eps`` is given.
    """
    if flavor not in FLAVORS:
        raise ValueError(f"flavor must be one of {FLAVORS}, got {flavor!r}")
    net = _network(model)

    def loss_fn(m, xb, yb, rng):
        x_adv = perturb_batch(m, xb, yb, cfg, flavor, rng)
        return ad.cross_entropy(m.forward(x_adv), yb)

    return train(net, X, y, cfg.train_config(), X_eval, y_eval, loss_fn, _robust_eval(X_eval, y_eval, cfg, eval_eps))


def trades_inner(model, xb, cfg: DefenseConfig, rng) -> np.ndarray:
    """PGD on ``KL(f(x) || f(x'))`` from a small Gaussian start, kept in the eps-ball."""
    eps = cfg.eps
    alpha = cfg.step_size("trades")
    with ad.no_grad():
        clean = ad.Tensor(model.forward(xb).data)
    x_adv = clip_box(project_linf(xb + 0.001 * rng.standard_normal(xb.shape), xb, eps), (0.0, 1.0))
    for _ in range(int(cfg.steps)):
        xt = ad.Tensor(x_adv, requires_grad=True)
        ad.kl_divergence(clean, model.forward(xt)).backward()
        model.zero_grad()
        x_adv = clip_box(project_linf(fgsm_step(x_adv, xt.grad, alpha, box=None), xb, eps), (0.0, 1.0))
    return x_adv


def trades_loss(model, xb, yb, cfg: DefenseConfig, rng):
    x_adv = trades_inner(model, xb, cfg, rng)
    logits = model.forward(xb)
    kl = ad.kl_divergence(logits, model.forward(x_adv))
    return ad.cross_entropy(logits, yb) + kl * cfg.trades_beta


def trades_train(model, X, y, cfg: DefenseConfig, X_eval=None, y_eval=None, eval_eps=None) -> TrainReport:
    """Minimize ``CE(f(x), y) + β·KL(f(x) || f(x'))`` with ``x'`` from the inner PGD."""
    net = _network(model)

    def loss_fn(m, xb, yb, rng):
        return trades_loss(m, xb, yb, cfg, rng)

    return train(net, X, y, cfg.train_config(), X_eval, y_eval, loss_fn, _robust_eval(X_eval, y_eval, cfg, eval_eps))


class AdversarialMLPClassifier(MLPClassifier):
    """:class:`MLPClassifier` fitted with adversarial training or TRADES.

    ``flavor`` is one of ``fgsm``, ``fast``, ``pgd`` or ``trades``.
    """

    def __init__(
        self,
        hidden_layer_sizes=(64,),
        flavor="pgd",
        eps=0.2,
        alpha=None,
        steps=10,
        random_start=None,
        trades_beta=6.0,
        epochs=20,
        batch_size=32,
        learning_rate=0.1,
        optimizer="sgd_momentum",
        n_classes=None,
        seed=0,
    ):
        super().__init__(hidden_layer_sizes, epochs, batch_size, learning_rate, optimizer, n_classes, seed)
        self.flavor = flavor
        self.eps = eps
        self.alpha = alpha
        self.steps = steps
        self.random_start = random_start
        self.trades_beta = trades_beta

    def defense_config(self) -> DefenseConfig:
        return DefenseConfig(
            self.eps, self.alpha, self.steps, self.random_start, self.trades_beta,
            self.epochs, self.batch_size, self.learning_rate, self.optimizer, self.seed,
        )

    def fit(self, X, y):
        from ..validation import check_images, check_labels

        X = check_images(X)
        n_classes = self.n_classes or int(np.max(y)) + 1
        y = check_labels(y, X.shape[0], n_classes)
        cfg = self.defense_config()
        self.classes_ = np.arange(n_classes)
        self.network_ = self._build(X.shape[1:], n_classes)
        if self.flavor == "trades":
            self.report_ = trades_train(self.network_, X, y, cfg)
        else:
            self.report_ = adversarial_train(self.network_, X, y, cfg, self.flavor)
        return self


__all__ = [
    "AdversarialMLPClassifier",
    "DefenseConfig",
    "FLAVORS",
    "accuracy",
    "adversarial_train",
    "perturb_batch",
    "robust_accuracy",
    "trades_inner",
    "trades_loss",
    "trades_train",
]
