"""scikit-learn compatible wrappers around :class:`Network` training."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from ..autodiff import softmax_np
from ..validation import check_images, check_is_fitted, check_labels
from .network import build_cnn, build_mlp
from .training import TrainConfig, train


class _NetworkClassifier(ClassifierMixin, BaseEstimator):
    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
            optimizer=self.optimizer,
        )

    def fit(self, X, y):
        X = check_images(X, box=None)
        n_classes = self.n_classes or int(np.max(y)) + 1
        y = check_labels(y, X.shape[0], n_classes)
        self.classes_ = np.arange(n_classes)
        self.network_ = self._build(X.shape[1:], n_classes)
        self.report_ = train(self.network_, X, y, self._train_config())
        return self

    # the attack contract: anything exposing forward() and num_classes
    def forward(self, x):
        check_is_fitted(self, "network_")
        return self.network_.forward(x)

    @property
    def num_classes(self) -> int:
        check_is_fitted(self, "network_")
        return self.network_.num_classes

    def decision_function(self, X):
        check_is_fitted(self, "network_")
        return self.network_.logits(np.asarray(X, dtype=np.float64))

    def predict_proba(self, X):
        return softmax_np(self.decision_function(X))

    def predict(self, X):
        return np.argmax(self.decision_function(X), axis=1)


class MLPClassifier(_NetworkClassifier):
    """Fully connected ReLU network trained with minibatch SGD.

    ``hidden_layer_sizes=()`` yields a plain softmax-regression model.
    """

    def __init__(
        self,
        hidden_layer_sizes=(64,),
        epochs=20,
        batch_size=32,
        learning_rate=0.1,
        optimizer="sgd_momentum",
        n_classes=None,
        seed=0,
    ):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.n_classes = n_classes
        self.seed = seed

    def _build(self, input_shape, n_classes):
        return build_mlp(input_shape, tuple(self.hidden_layer_sizes), n_classes, seed=self.seed)


class CNNClassifier(_NetworkClassifier):
    """One 3x3 convolution, ReLU, optional hidden affine layer, logits."""

    def __init__(
        self,
        channels=4,
        hidden=None,
        epochs=10,
        batch_size=32,
        learning_rate=0.05,
        optimizer="sgd_momentum",
        n_classes=None,
        seed=0,
    ):
        self.channels = channels
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.optimizer = optimizer
        self.n_classes = n_classes
        self.seed = seed

    def _build(self, input_shape, n_classes):
        return build_cnn(input_shape, self.channels, n_classes, hidden=self.hidden, seed=self.seed)
