"""Layer types for :class:`~bnrobust.network.model.SequentialModel`.

Every layer exposes ``params`` (an ordered ``role -> array`` dict of its
trainable tensors), ``forward(x, training) -> (y, cache)`` and
``backward(cache, dy) -> (dx, grads)`` where ``grads`` mirrors ``params``.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..exceptions import DimensionError, ParameterError
from ..norm import BatchNormLayer, NormKind


def kaiming_uniform(rng, shape, fan_in):
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, shape)


class Layer:
    kind = "layer"
    # roles eligible for weight-noise injection by default
    weight_roles = ()
    bias_roles = ()
    norm_roles = ()

    @property
    def params(self):
        return {}

    def set_param(self, role, value):
        current = self.params[role]
        if value.shape != current.shape:
            raise DimensionError(f"{self.kind}.{role}: shape {value.shape} != {current.shape}")
        setattr(self, role, np.array(value, dtype=np.float64))

    def config(self):
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.config().items())
        return f"{type(self).__name__}({args})"


class Dense(Layer):
    kind = "dense"
    weight_roles = ("weight",)
    bias_roles = ("bias",)

    def __init__(self, in_features, out_features, rng=None, weight=None, bias=None):
        self.in_features = int(in_features)
        self.out_features = int(out_features)
        shape = (self.in_features, self.out_features)
        if weight is None:
            weight = kaiming_uniform(rng, shape, self.in_features) if rng is not None else np.zeros(shape)
        self.weight = np.array(weight, dtype=np.float64).reshape(shape)
        self.bias = np.zeros(self.out_features) if bias is None else np.array(bias, dtype=np.float64)
        if self.bias.shape != (self.out_features,):
            raise DimensionError(f"dense bias must have shape ({self.out_features},), got {self.bias.shape}")

    @property
    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def config(self):
        return {"in_features": self.in_features, "out_features": self.out_features}

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise DimensionError(f"dense expects (m, {self.in_features}) input, got {x.shape}")
        return x @ self.weight + self.bias, x

    def backward(self, x, dy):
        return dy @ self.weight.T, {"weight": x.T @ dy, "bias": dy.sum(axis=0)}


class Conv2d(Layer):
    """Valid-padding 2-D convolution over ``(m, c, h, w)`` inputs."""

    kind = "conv2d"
    weight_roles = ("weight",)
    bias_roles = ("bias",)

    def __init__(self, in_channels, out_channels, kernel_size, stride=1, rng=None, weight=None, bias=None):
        kh, kw = (kernel_size, kernel_size) if np.isscalar(kernel_size) else tuple(kernel_size)
        if int(stride) < 1:
            raise ParameterError(f"stride must be positive, got {stride}")
        self.in_channels = int(in_channels)
        self.out_channels = int(out_channels)
        self.kernel_size = (int(kh), int(kw))
        self.stride = int(stride)
        shape = (self.out_channels, self.in_channels, *self.kernel_size)
        fan_in = self.in_channels * kh * kw
        if weight is None:
            weight = kaiming_uniform(rng, shape, fan_in) if rng is not None else np.zeros(shape)
        self.weight = np.array(weight, dtype=np.float64).reshape(shape)
        self.bias = np.zeros(self.out_channels) if bias is None else np.array(bias, dtype=np.float64)

    @property
    def params(self):
        return {"weight": self.weight, "bias": self.bias}

    def config(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "kernel_size": list(self.kernel_size),
            "stride": self.stride,
        }

    def output_hw(self, h, w):
        kh, kw = self.kernel_size
        return (h - kh) // self.stride + 1, (w - kw) // self.stride + 1

    def forward(self, x, training=False):
        kh, kw = self.kernel_size
        if x.ndim != 4 or x.shape[1] != self.in_channels or x.shape[2] < kh or x.shape[3] < kw:
            raise DimensionError(
                f"conv2d expects (m, {self.in_channels}, >={kh}, >={kw}) input, got {x.shape}"
            )
        s = self.stride
        windows = sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::s, ::s]
        y = np.einsum("mchwij,ocij->mohw", windows, self.weight, optimize=True)
        return y + self.bias[None, :, None, None], (x.shape, windows)

    def backward(self, cache, dy):
        x_shape, windows = cache
        s = self.stride
        kh, kw = self.kernel_size
        ho, wo = dy.shape[2], dy.shape[3]
        dw = np.einsum("mohw,mchwij->ocij", dy, windows, optimize=True)
        dx = np.zeros(x_shape)
        for i in range(kh):
            for j in range(kw):
                dx[:, :, i:i + s * ho:s, j:j + s * wo:s] += np.einsum(
                    "mohw,oc->mchw", dy, self.weight[:, :, i, j], optimize=True
                )
        return dx, {"weight": dw, "bias": dy.sum(axis=(0, 2, 3))}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training=False):
        mask = x > 0
        return x * mask, mask

    def backward(self, mask, dy):
        return dy * mask, {}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, training=False):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, shape, dy):
        return dy.reshape(shape), {}


class BatchNorm(Layer):
    """Adapter exposing a :class:`BatchNormLayer` as a sequential layer."""

    kind = "batchnorm"
    norm_roles = ("gamma", "beta")

    def __init__(self, num_features, kind=None, momentum=0.1):
        self.bn = BatchNormLayer(num_features, kind=kind, momentum=momentum)

    @property
    def params(self):
        return {"gamma": self.bn.gamma, "beta": self.bn.beta}

    def set_param(self, role, value):
        if value.shape != (self.bn.num_features,):
            raise DimensionError(f"batchnorm.{role}: shape {value.shape} != ({self.bn.num_features},)")
        setattr(self.bn, role, np.array(value, dtype=np.float64))

    @property
    def buffers(self):
        return {"running_mean": self.bn.running_mean, "running_sigma": self.bn.running_sigma}

    def config(self):
        return {"num_features": self.bn.num_features, "kind": self.bn.kind.to_dict(), "momentum": self.bn.momentum}

    def forward(self, x, training=False):
        if training:
            return self.bn.forward_train(x)
        return self.bn.forward_eval(x, return_cache=True)

    def backward(self, cache, dy):
        dx, dgamma, dbeta = self.bn.backward(cache, dy)
        return dx, {"gamma": dgamma, "beta": dbeta}


LAYER_TYPES = {cls.kind: cls for cls in (Dense, Conv2d, ReLU, Flatten, BatchNorm)}


def layer_from_config(kind, config):
    if kind not in LAYER_TYPES:
        raise ParameterError(f"unknown layer type {kind!r}")
    cls = LAYER_TYPES[kind]
    if cls is BatchNorm:
        return BatchNorm(config["num_features"], NormKind.parse(config["kind"]), config["momentum"])
    return cls(**config)
