"""Empirical SGD gradient-noise estimates.

For per-sample losses ``L_i`` with full-data mean ``L_D``, the mini-batch
gradient of batch ``B`` deviates from ``grad L_D`` by a zero-mean error whose
expected squared norm is bounded by ``C / |B|`` with
``C = E ||grad L_i - grad L_D||^2``.  This module estimates ``C`` from
per-sample gradients and measures the batch-gradient error directly.

Models are duck-typed: anything with ``flat_gradient(inputs, labels)``
returning the gradient of the mean loss works; a :class:`SequentialModel`
is adapted automatically, with batch-norm layers in inference mode so that
a sample's gradient does not depend on the rest of its batch.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .exceptions import DegenerateInputError, ParameterError
from .network.training import loss_softmax_ce
from .tensor import SeededRng


class ScalarQuadratic:
    """One-parameter model with per-sample loss ``scale * (w - x_i)**2``."""

    def __init__(self, w=0.0, scale=1.0):
        self.w = float(w)
        self.scale = float(scale)

    def flat_gradient(self, inputs, labels=None):
        x = np.asarray(inputs, dtype=np.float64).reshape(len(inputs), -1)[:, 0]
        return np.array([self.scale * 2.0 * np.mean(self.w - x)])


def sequential_gradient(model, inputs, labels):
    logits, caches = model.forward(inputs, training=False)
    _, dlogits = loss_softmax_ce(logits, labels)
    grads = model.backward(caches, dlogits)
    return np.concatenate([g.ravel() for g in grads.values()])


def _gradient_fn(model):
    if hasattr(model, "flat_gradient"):
        return model.flat_gradient
    return lambda x, y: sequential_gradient(model, x, y)


def per_sample_gradients(model, dataset):
    grad = _gradient_fn(model)
    x, y = dataset.inputs, dataset.labels
    return np.stack([grad(x[i:i + 1], y[i:i + 1]) for i in range(len(y))])


def full_gradient(model, dataset):
    """Gradient of the mean loss over the whole dataset, flattened."""
    if len(dataset) == 0:
        raise DegenerateInputError("dataset is empty")
    return _gradient_fn(model)(dataset.inputs, dataset.labels)


@dataclass
class GradNoiseEstimate:
    C_hat: float
    error_mean_norm: float
    n: int
    alpha: float | None = None
    batch_size: int | None = None
    empirical_lhs: float | None = None
    bound_rhs: float | None = None
    trials: int | None = None
    holds: bool | None = None

    def to_dict(self):
        return asdict(self)


def estimate_C(model, dataset):
    """Mean squared deviation of per-sample gradients from the full gradient."""
    n = len(dataset)
    if n < 2:
        raise DegenerateInputError(f"need at least 2 samples to estimate gradient noise, got {n}")
    per_sample = per_sample_gradients(model, dataset)
    dev = per_sample - full_gradient(model, dataset)
    c_hat = float(np.mean(np.sum(dev * dev, axis=1)))
    err = float(np.linalg.norm(dev.mean(axis=0)))
    return GradNoiseEstimate(C_hat=c_hat, error_mean_norm=err, n=n)


def bound_rhs(alpha, batch_size, c_hat):
    return alpha * alpha * c_hat / batch_size


def check_bound(model, dataset, alpha, batch_size, trials=1000, seed=0, c_hat=None, rtol=0.05):
    """Compare the measured batch-gradient error with ``alpha**2 * C / B``.

    Batches are drawn without replacement within a batch.  ``holds`` allows
    ``rtol`` relative slack since the left side is a Monte Carlo estimate.
    """
    n = len(dataset)
    if isinstance(batch_size, bool) or int(batch_size) != batch_size or batch_size < 1:
        raise ParameterError(f"batch_size must be a positive integer, got {batch_size!r}")
    if batch_size > n:
        raise ParameterError(f"batch_size {batch_size} exceeds dataset size {n}")
    if int(trials) < 1:
        raise ParameterError(f"trials must be positive, got {trials}")
    estimate = estimate_C(model, dataset)
    if c_hat is None:
        c_hat = estimate.C_hat
    grad = _gradient_fn(model)
    g_full = full_gradient(model, dataset)
    rng = SeededRng(seed)
    total = 0.0
    for t in range(int(trials)):
        idx = np.sort(rng.child(t).choice(n, int(batch_size), replace=False))
        diff = alpha * (grad(dataset.inputs[idx], dataset.labels[idx]) - g_full)
        total += float(diff @ diff)
    lhs = total / trials
    rhs = bound_rhs(alpha, batch_size, c_hat)
    estimate.C_hat = float(c_hat)
    estimate.alpha = float(alpha)
    estimate.batch_size = int(batch_size)
    estimate.empirical_lhs = lhs
    estimate.bound_rhs = rhs
    estimate.trials = int(trials)
    estimate.holds = bool(lhs <= rhs * (1 + rtol) or math.isclose(lhs, rhs, abs_tol=1e-15))
    return estimate
