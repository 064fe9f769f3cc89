"""Local intrinsic dimensionality features and an adversarial detector."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import roc_auc_score
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from ..rng import stream
from ..validation import check_images, check_is_fitted


class LidError(ValueError):
    pass


def lid_mle(queries, reference, k: int = 20, layer: str | int = 0) -> np.ndarray:
    """Maximum-likelihood LID of each query row against ``reference`` rows.

    ``LID = -(1/k · Σ_i ln(r_i / r_k))^{-1}`` over the ``k`` smallest
    distances. One exact zero distance is taken to be the query itself and
    skipped; any further zero distance makes the estimate undefined.
    """
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    R = np.atleast_2d(np.asarray(reference, dtype=np.float64))
    k = int(k)
    if k < 1:
        raise LidError(f"k must be >= 1, got {k}")
    if R.shape[0] <= k:
        raise LidError(f"reference batch of {R.shape[0]} points needs more than k={k}")
    sq = (Q * Q).sum(1)[:, None] + (R * R).sum(1)[None, :] - 2 * Q @ R.T
    D = np.sqrt(np.maximum(sq, 0.0))
    # exact duplicates: recompute so rounding cannot hide a zero
    D[D < 1e-9] = np.linalg.norm(Q[:, None, :] - R[None, :, :], axis=2)[D < 1e-9]
    D.sort(axis=1)
    out = np.empty(Q.shape[0])
    for i, row in enumerate(D):
        if row[0] == 0:
            row = row[1:]
        r = row[:k]
        if r[0] == 0:
            raise LidError(f"layer {layer}: query {i} has repeated zero distances (duplicate points)")
        logs = np.log(r / r[-1]).sum()
        if logs == 0:
            raise LidError(f"layer {layer}: query {i} has {k} equidistant neighbours; LID diverges")
        out[i] = -k / logs
    return out


def layer_activations(model, X) -> list[np.ndarray]:
    """Per-layer flattened activations (ReLU outputs and logits)."""
    for obj in (model, getattr(model, "network_", None), getattr(model, "classifier_", None)):
        if obj is not None and hasattr(obj, "activations"):
            return obj.activations(X)
        if obj is not None and hasattr(obj, "network_"):
            return obj.network_.activations(X)
    raise TypeError(f"{type(model).__name__} does not expose layer activations")


def lid_features(activations, reference_activations, k: int = 20) -> np.ndarray:
    """Stack per-layer LID estimates into ``[n, layers]``."""
    if len(activations) != len(reference_activations):
        raise LidError("activation and reference layer counts differ")
    cols = [lid_mle(a, r, k, layer=j) for j, (a, r) in enumerate(zip(activations, reference_activations))]
    return np.stack(cols, axis=1)


class LidDetector(ClassifierMixin, BaseEstimator):
    """Logistic regression on per-layer LID features of ``model``.

    ``fit(X, y)`` takes inputs with ``y=1`` for adversarial and ``y=0`` for
    clean; the clean inputs double as the reference batch.
    """

    def __init__(self, model=None, k=20, C=1.0):
        self.model = model
        self.k = k
        self.C = C

    def features(self, X) -> np.ndarray:
        check_is_fitted(self, "reference_")
        return lid_features(layer_activations(self.model, X), self.reference_, self.k)

    def fit(self, X, y):
        X = check_images(X)
        y = np.asarray(y).astype(np.int64)
        if y.shape != (X.shape[0],) or set(np.unique(y)) != {0, 1}:
            raise ValueError("y must be 0 (clean) / 1 (adversarial) with both classes present")
        self.reference_ = layer_activations(self.model, X[y == 0])
        F = self.features(X)
        self.classifier_ = make_pipeline(StandardScaler(), LogisticRegression(C=self.C)).fit(F, y)
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "classifier_")
        return self.classifier_.predict_proba(self.features(check_images(X)))

    def score_samples(self, X) -> np.ndarray:
        """Probability of being adversarial."""
        return self.predict_proba(X)[:, 1]

    def predict(self, X):
        return (self.score_samples(X) >= 0.5).astype(np.int64)

    def auc(self, X, y) -> float:
        return float(roc_auc_score(y, self.score_samples(X)))


def lid_detector_train(model, clean, adversarial, k=20, C=1.0) -> LidDetector:
    clean, adversarial = check_images(clean, "clean"), check_images(adversarial, "adversarial")
    X = np.concatenate([clean, adversarial])
    y = np.r_[np.zeros(len(clean), np.int64), np.ones(len(adversarial), np.int64)]
    return LidDetector(model, k, C).fit(X, y)


def lid_detect(detector: LidDetector, X) -> np.ndarray:
    return detector.score_samples(X)


def lid_heldout_auc(model, clean, adversarial, k=20, test_fraction=0.3, seed=0, C=1.0):
    """Fit on a paired split of clean/adversarial rows, report held-out AUC.

    Row ``i`` of ``adversarial`` is the attacked version of row ``i`` of
    ``clean``; both go to the same side of the split. Held-out queries are
    scored against the training reference batch.
    """
    clean, adversarial = check_images(clean, "clean"), check_images(adversarial, "adversarial")
    if clean.shape != adversarial.shape:
        raise ValueError("clean and adversarial sets must be paired row for row")
    order = stream(seed, "defense/lid_split").permutation(len(clean))
    n_test = max(1, int(round(len(clean) * test_fraction)))
    test, fit_idx = order[:n_test], order[n_test:]
    det = lid_detector_train(model, clean[fit_idx], adversarial[fit_idx], k, C)
    X = np.concatenate([clean[test], adversarial[test]])
    y = np.r_[np.zeros(len(test), np.int64), np.ones(len(test), np.int64)]
    return det, det.auc(X, y)
