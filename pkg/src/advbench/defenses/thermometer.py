"""Thermometer encoding and the encode-then-classify pipeline."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin, clone

from .. import autodiff as ad
from ..autodiff import softmax_np
from ..validation import check_images, check_is_fitted


def thermometer_encode(x, levels: int = 10) -> np.ndarray:
    """Unary code along a new trailing axis of length ``levels``.

    Bit ``i`` is set iff ``v·levels >= i + 1``, so the number of ones is
    ``floor(v·levels)``: 0 -> all zeros, 1 -> all ones, 0.66 -> 1111110000.
    """
    levels = int(levels)
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)) or x.min(initial=0.0) < 0 or x.max(initial=0.0) > 1:
        raise ValueError("thermometer encoding needs pixel values in [0, 1]")
    thresholds = np.arange(1, levels + 1, dtype=np.float64)
    return (x[..., None] * levels >= thresholds).astype(np.float64)


def thermometer_decode(code) -> np.ndarray:
    """Inverse up to quantization: popcount / levels."""
    code = np.asarray(code)
    return code.sum(axis=-1) / code.shape[-1]


class ThermometerEncoder(TransformerMixin, BaseEstimator):
    """Stateless transformer wrapping :func:`thermometer_encode`."""

    def __init__(self, levels=10):
        self.levels = levels

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return thermometer_encode(X, self.levels)


class IdentityPreprocessor(TransformerMixin, BaseEstimator):
    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return np.asarray(X, dtype=np.float64)


class PreprocessedClassifier(ClassifierMixin, BaseEstimator):
    """``classifier`` trained and evaluated on ``preprocessor.transform(X)``.

    The forward pass routes the preprocessor through the tape as a
    piecewise-constant op, so plain gradients through it are zero; attacks
    that want a usable gradient go through :func:`~advbench.attacks.bpda`.
    """

    def __init__(self, preprocessor=None, classifier=None):
        self.preprocessor = preprocessor
        self.classifier = classifier

    def fit(self, X, y):
        from ..models import MLPClassifier

        X = check_images(X)
        self.preprocessor_ = clone(self.preprocessor) if self.preprocessor is not None else IdentityPreprocessor()
        self.classifier_ = clone(self.classifier) if self.classifier is not None else MLPClassifier()
        self.preprocessor_.fit(X, y)
        self.classifier_.fit(self.preprocessor_.transform(X), y)
        self.classes_ = self.classifier_.classes_
        return self

    @classmethod
    def from_fitted(cls, preprocessor, classifier):
        """Wrap an already-fitted preprocessor and classifier."""
        pipe = cls(preprocessor, classifier)
        pipe.preprocessor_, pipe.classifier_ = preprocessor, classifier
        pipe.classes_ = getattr(classifier, "classes_", None)
        return pipe

    def forward(self, x):
        check_is_fitted(self, "classifier_")
        pre = self.preprocessor_
        if isinstance(pre, IdentityPreprocessor):
            return self.classifier_.forward(x)
        return self.classifier_.forward(ad.blocked(x, pre.transform, name="preprocess"))

    @property
    def num_classes(self) -> int:
        return self.classifier_.num_classes

    def decision_function(self, X):
        with ad.no_grad():
            return self.forward(ad.Tensor(np.asarray(X, dtype=np.float64))).data

    def predict_proba(self, X):
        return softmax_np(self.decision_function(X))

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)
