"""Batch normalization with L2, L1 and TopK scale statistics.

All three variants centre each feature on the batch mean and divide by a
per-feature scale ``sigma``.  They differ only in how ``sigma`` is computed:

* ``L2``   -- root of the mean squared deviation plus ``eps``
* ``L1``   -- mean absolute deviation, plus ``eps``
* ``TopK`` -- mean of the ``k`` largest absolute deviations, plus ``eps``

Inputs of rank 4 ``(m, c, h, w)`` are normalized per channel by folding the
spatial positions into the batch axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateInputError, DimensionError, ParameterError
from .tensor import as_tensor, mean_axis0

VARIANTS = ("l2", "l1", "topk")


@dataclass(frozen=True)
class NormKind:
    """Which scale statistic a batch-norm layer uses.

    ``l1_scale`` multiplies the L1 statistic by ``sqrt(pi/2)`` so that it
    estimates the standard deviation of Gaussian data; off by default.
    """

    variant: str = "l2"
    eps: float = 1e-5
    k: int = 10
    l1_scale: bool = False

    def __post_init__(self):
        variant = str(self.variant).lower()
        if variant not in VARIANTS:
            raise ParameterError(f"unknown norm variant {self.variant!r}; expected one of {VARIANTS}")
        object.__setattr__(self, "variant", variant)
        if not self.eps > 0:
            raise ParameterError(f"eps must be positive, got {self.eps}")
        if isinstance(self.k, bool) or int(self.k) != self.k or self.k < 1:
            raise ParameterError(f"k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    @classmethod
    def parse(cls, spec, **kwargs):
        """Build from ``"l2"``, ``"l1"``, ``"topk"`` or ``"topk:K"``."""
        if isinstance(spec, NormKind):
            return spec
        if isinstance(spec, dict):
            return cls(**{**spec, **kwargs})
        name, _, k = str(spec).partition(":")
        if k:
            kwargs["k"] = int(k)
        return cls(variant=name, **kwargs)

    def to_dict(self):
        return {"variant": self.variant, "eps": self.eps, "k": self.k, "l1_scale": self.l1_scale}

    def __str__(self):
        return f"topk:{self.k}" if self.variant == "topk" else self.variant


def _check_stats_input(x, mu):
    x = as_tensor(x, 2)
    mu = as_tensor(mu, 1, "mu")
    if x.shape[0] == 0:
        raise DegenerateInputError("empty batch")
    if mu.shape[0] != x.shape[1]:
        raise DimensionError(f"mu has {mu.shape[0]} entries for {x.shape[1]} features")
    return x, mu


def sigma_l2(x, mu, eps):
    x, mu = _check_stats_input(x, mu)
    dev = x - mu
    return np.sqrt((dev * dev).sum(axis=0) / x.shape[0] + eps)


def sigma_l1(x, mu, eps, scale=False):
    x, mu = _check_stats_input(x, mu)
    mad = np.abs(x - mu).sum(axis=0) / x.shape[0]
    if scale:
        mad = mad * math.sqrt(math.pi / 2)
    return mad + eps


def topk_rows(absdev, k):
    """Row indices of the ``min(k, m)`` largest entries in each column.

    Returns an int array of shape ``(k_eff, d)``.  Equal values are ranked
    by ascending row index.
    """
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise ParameterError(f"k must be a positive integer, got {k!r}")
    k_eff = min(int(k), absdev.shape[0])
    # stable sort keeps equal keys in row order
    order = np.argsort(-absdev, axis=0, kind="stable")
    return order[:k_eff]


def sigma_topk(x, mu, k, eps):
    """Mean of the ``k`` largest absolute deviations, with the selected rows."""
    x, mu = _check_stats_input(x, mu)
    absdev = np.abs(x - mu)
    idx = topk_rows(absdev, k)
    selected = np.take_along_axis(absdev, idx, axis=0)
    return selected.sum(axis=0) / idx.shape[0] + eps, idx


def batch_sigma(x, mu, kind):
    """Scale statistic for ``kind``; returns ``(sigma, topk_indices_or_None)``."""
    if kind.variant == "l2":
        return sigma_l2(x, mu, kind.eps), None
    if kind.variant == "l1":
        return sigma_l1(x, mu, kind.eps, kind.l1_scale), None
    return sigma_topk(x, mu, kind.k, kind.eps)


@dataclass
class BNCache:
    x: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    xhat: np.ndarray
    topk: np.ndarray | None = None
    training: bool = True
    input_shape: tuple = field(default=())


def _fold(x):
    if x.ndim == 2:
        return x
    if x.ndim == 4:
        m, c, h, w = x.shape
        return x.transpose(0, 2, 3, 1).reshape(m * h * w, c)
    raise DimensionError(f"batch norm expects rank 2 or 4 input, got shape {x.shape}")


def _unfold(y, shape):
    if len(shape) == 2:
        return y
    m, c, h, w = shape
    return y.reshape(m, h, w, c).transpose(0, 3, 1, 2)


class BatchNormLayer:
    """Per-feature batch normalization with trainable scale and shift.

    Running statistics track the batch mean and the batch ``sigma`` itself
    (not a variance) so that every variant can be used at inference time.
    """

    def __init__(self, num_features, kind=None, momentum=0.1):
        if int(num_features) < 1:
            raise ParameterError(f"num_features must be positive, got {num_features}")
        if not 0 < momentum <= 1:
            raise ParameterError(f"momentum must lie in (0, 1], got {momentum}")
        self.num_features = int(num_features)
        self.kind = NormKind.parse(kind) if kind is not None else NormKind()
        self.momentum = float(momentum)
        d = self.num_features
        self.gamma = np.ones(d)
        self.beta = np.zeros(d)
        self.running_mean = np.zeros(d)
        self.running_sigma = np.ones(d)

    def __repr__(self):
        return f"BatchNormLayer({self.num_features}, kind={self.kind}, momentum={self.momentum})"

    def _check_features(self, x2):
        if x2.shape[1] != self.num_features:
            raise DimensionError(f"batch norm expects {self.num_features} features, got {x2.shape[1]}")

    def forward_train(self, x):
        x = as_tensor(x)
        shape = x.shape
        x2 = _fold(x)
        self._check_features(x2)
        mu = mean_axis0(x2)
        sigma, idx = batch_sigma(x2, mu, self.kind)
        xhat = (x2 - mu) / sigma
        y = self.gamma * xhat + self.beta
        m = self.momentum
        self.running_mean = (1 - m) * self.running_mean + m * mu
        self.running_sigma = (1 - m) * self.running_sigma + m * sigma
        cache = BNCache(x2, mu, sigma, xhat, idx, True, shape)
        return _unfold(y, shape), cache

    def forward_eval(self, x, return_cache=False):
        x = as_tensor(x)
        shape = x.shape
        x2 = _fold(x)
        self._check_features(x2)
        if np.any(self.running_sigma <= 0):
            raise DegenerateInputError("running_sigma contains non-positive entries")
        xhat = (x2 - self.running_mean) / self.running_sigma
        y = _unfold(self.gamma * xhat + self.beta, shape)
        if return_cache:
            return y, BNCache(x2, self.running_mean.copy(), self.running_sigma.copy(), xhat, None, False, shape)
        return y

    def _dsigma_weights(self, cache):
        """Jacobian rows of ``sigma`` w.r.t. the folded input, shape ``(m, d)``."""
        dev = cache.x - cache.mu
        m = dev.shape[0]
        kind = self.kind
        if kind.variant == "l2":
            # d/dx_l sqrt(mean(dev^2) + eps); the mean term cancels since sum(dev) = 0
            return dev / (m * cache.sigma)
        s = np.sign(dev)
        if kind.variant == "l1":
            w = (s - s.sum(axis=0) / m) / m
            return w * math.sqrt(math.pi / 2) if kind.l1_scale else w
        sel = np.zeros_like(s)
        np.put_along_axis(sel, cache.topk, np.take_along_axis(s, cache.topk, axis=0), axis=0)
        return (sel - sel.sum(axis=0) / m) / cache.topk.shape[0]

    def backward(self, cache, dy):
        """Gradients ``(dx, dgamma, dbeta)`` of the forward map that made ``cache``."""
        dy = as_tensor(dy)
        if dy.shape != tuple(cache.input_shape):
            raise DimensionError(f"dy shape {dy.shape} does not match cached input {cache.input_shape}")
        g2 = _fold(dy)
        dbeta = g2.sum(axis=0)
        dgamma = (g2 * cache.xhat).sum(axis=0)
        g = g2 * self.gamma
        sigma = cache.sigma
        if not cache.training:
            return _unfold(g / sigma, cache.input_shape), dgamma, dbeta
        m = g.shape[0]
        dev = cache.x - cache.mu
        dx = (g - g.sum(axis=0) / m) / sigma
        dx -= (g * dev).sum(axis=0) / (sigma * sigma) * self._dsigma_weights(cache)
        return _unfold(dx, cache.input_shape), dgamma, dbeta


def bn_forward_train(layer, x):
    return layer.forward_train(x)


def bn_forward_eval(layer, x):
    return layer.forward_eval(x)


def bn_backward(layer, cache, dy):
    return layer.backward(cache, dy)
