"""Small model builders: an MLP and a two-block CNN, BN after every hidden layer."""
from __future__ import annotations

from ..norm import NormKind
from ..tensor import SeededRng
from .layers import BatchNorm, Conv2d, Dense, Flatten, ReLU
from .model import SequentialModel


def _norm(width, norm, momentum):
    if norm is None:
        return []
    return [BatchNorm(width, NormKind.parse(norm), momentum)]


def build_mlp(in_features, hidden, num_classes, norm="l2", seed=0, momentum=0.1):
    """``Dense -> BN -> ReLU`` per hidden width, then a linear head.

    ``norm=None`` drops the batch-norm layers.  Weight draws come from
    per-layer child streams so the initial weights do not depend on ``norm``.
    """
    rng = SeededRng(seed)
    layers = []
    width = in_features
    for i, h in enumerate(hidden):
        layers.append(Dense(width, h, rng=rng.child(i)))
        layers += _norm(h, norm, momentum)
        layers.append(ReLU())
        width = h
    layers.append(Dense(width, num_classes, rng=rng.child(len(hidden))))
    return SequentialModel(layers)


def build_cnn(input_shape, channels=(8, 16), hidden=32, num_classes=10, norm="l2",
              seed=0, kernel_size=3, stride=2, momentum=0.1):
    rng = SeededRng(seed)
    c, h, w = input_shape
    layers = []
    for i, out_c in enumerate(channels):
        conv = Conv2d(c, out_c, kernel_size, stride=stride, rng=rng.child(i))
        layers.append(conv)
        layers += _norm(out_c, norm, momentum)
        layers.append(ReLU())
        h, w = conv.output_hw(h, w)
        c = out_c
    layers.append(Flatten())
    n = len(channels)
    layers.append(Dense(c * h * w, hidden, rng=rng.child(n)))
    layers += _norm(hidden, norm, momentum)
    layers.append(ReLU())
    layers.append(Dense(hidden, num_classes, rng=rng.child(n + 1)))
    return SequentialModel(layers)
