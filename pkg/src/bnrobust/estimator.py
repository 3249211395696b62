"""scikit-learn compatible wrappers.

:class:`BNMLPClassifier` trains an MLP with a chosen batch-norm variant and
can report its own weight-noise robustness; :class:`BatchNormScaler` applies
the variant's centring and scaling as a stateless-after-fit transformer, so
either can sit inside a :class:`sklearn.pipeline.Pipeline`.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_is_fitted, validate_data

from .network.data import Dataset
from .network.training import SgdConfig, predict_classes, train
from .network.zoo import build_mlp
from .noise import DEFAULT_ETAS, NoiseSweepConfig, run_sweep
from .norm import NormKind, batch_sigma
from .tensor import mean_axis0


def _norm_kind(est):
    if est.norm is None:
        return None
    return NormKind(est.norm, eps=est.eps, k=est.k)


class BNMLPClassifier(ClassifierMixin, BaseEstimator):
    """Multilayer perceptron with L2, L1 or TopK batch normalization.

    Parameters
    ----------
    hidden_layer_sizes : tuple of int
        Width of each ``Dense -> BN -> ReLU`` block.
    norm : {"l2", "l1", "topk"} or None
        Batch-norm variant; ``None`` builds the network without BN.
    k : int
        Number of largest deviations averaged by the TopK variant.
    eps, momentum : float
        BN stabilizer and running-statistics momentum.
    learning_rate, batch_size, epochs
        Plain mini-batch SGD settings.
    random_state : int
        Seeds weight initialization and shuffling.
    """

    def __init__(self, hidden_layer_sizes=(64, 64), norm="l2", k=10, eps=1e-5, momentum=0.1,
                 learning_rate=0.05, batch_size=32, epochs=30, random_state=0):
        self.hidden_layer_sizes = hidden_layer_sizes
        self.norm = norm
        self.k = k
        self.eps = eps
        self.momentum = momentum
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.random_state = random_state

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        seed = 0 if self.random_state is None else int(self.random_state)
        self.model_ = build_mlp(X.shape[1], tuple(self.hidden_layer_sizes), len(self.classes_),
                                _norm_kind(self), seed, self.momentum)
        cfg = SgdConfig(self.learning_rate, self.batch_size, self.epochs, seed)
        self.training_log_ = train(self.model_, Dataset(X, encoded, len(self.classes_)), cfg)
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self.model_.predict_logits(X)

    def predict_proba(self, X):
        logits = self.decision_function(X)
        z = np.exp(logits - logits.max(axis=1, keepdims=True))
        return z / z.sum(axis=1, keepdims=True)

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self.classes_[predict_classes(self.model_, X)]

    def noise_robustness(self, X, y, etas=DEFAULT_ETAS, repeats=20, seed=0, threads=1):
        """Weight-noise sweep of the fitted network on ``(X, y)``."""
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        index = {c: i for i, c in enumerate(self.classes_)}
        labels = np.array([index[v] for v in np.asarray(y)])
        ds = Dataset(X, labels, len(self.classes_))
        return run_sweep(self.model_, ds, NoiseSweepConfig(list(etas), repeats, seed), threads)


class BatchNormScaler(TransformerMixin, BaseEstimator):
    """Centre features on their mean and divide by the chosen scale statistic."""

    def __init__(self, norm="l2", k=10, eps=1e-5):
        self.norm = norm
        self.k = k
        self.eps = eps

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        self.mean_ = mean_axis0(X)
        self.scale_, _ = batch_sigma(X, self.mean_, _norm_kind(self))
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return (X - self.mean_) / self.scale_

    def inverse_transform(self, X):
        check_is_fitted(self)
        return np.asarray(X, dtype=np.float64) * self.scale_ + self.mean_
