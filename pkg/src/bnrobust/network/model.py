from __future__ import annotations

import copy

import numpy as np

from ..exceptions import ContractError, DimensionError
from ..tensor import as_tensor
from .layers import BatchNorm


class ForwardCaches(list):
    """Per-layer caches from one forward call, tagged with the model version."""

    def __init__(self, caches, version, model_id):
        super().__init__(caches)
        self.version = version
        self.model_id = model_id


class SequentialModel:
    """An ordered stack of layers.

    Parameters are addressed by ``"<layer index>.<role>"`` paths, e.g.
    ``"0.weight"`` or ``"1.gamma"``; :meth:`parameters` always yields them in
    layer order and then role order.
    """

    def __init__(self, layers=()):
        self.layers = list(layers)
        self._version = 0

    def __repr__(self):
        inner = ",\n  ".join(repr(layer) for layer in self.layers)
        return f"SequentialModel([\n  {inner}\n])" if self.layers else "SequentialModel([])"

    def __len__(self):
        return len(self.layers)

    def parameters(self):
        return {
            f"{i}.{role}": value
            for i, layer in enumerate(self.layers)
            for role, value in layer.params.items()
        }

    def buffers(self):
        return {
            f"{i}.{name}": value
            for i, layer in enumerate(self.layers)
            if isinstance(layer, BatchNorm)
            for name, value in layer.buffers.items()
        }

    def parameter_roles(self):
        """Map each path to ``"weight"``, ``"bias"`` or ``"norm"``."""
        out = {}
        for i, layer in enumerate(self.layers):
            for role in layer.params:
                if role in layer.weight_roles:
                    group = "weight"
                elif role in layer.bias_roles:
                    group = "bias"
                else:
                    group = "norm"
                out[f"{i}.{role}"] = group
        return out

    def get_parameter(self, path):
        index, role = _split(path)
        return self.layers[index].params[role]

    def set_parameter(self, path, value):
        index, role = _split(path)
        self.layers[index].set_param(role, np.asarray(value, dtype=np.float64))
        self._version += 1

    def mark_updated(self):
        """Invalidate outstanding forward caches after in-place edits."""
        self._version += 1

    def norm_layers(self):
        return [layer.bn for layer in self.layers if isinstance(layer, BatchNorm)]

    def copy(self):
        return copy.deepcopy(self)

    def forward(self, x, training=False):
        out = as_tensor(x)
        caches = []
        for i, layer in enumerate(self.layers):
            try:
                out, cache = layer.forward(out, training)
            except DimensionError as exc:
                raise DimensionError(f"layer {i} ({layer.kind}): {exc}") from exc
            caches.append(cache)
        return out, ForwardCaches(caches, self._version, id(self))

    def predict_logits(self, x):
        return self.forward(x, training=False)[0]

    def backward(self, caches, dlogits):
        if (
            not isinstance(caches, ForwardCaches)
            or caches.model_id != id(self)
            or caches.version != self._version
            or len(caches) != len(self.layers)
        ):
            raise ContractError("caches do not belong to the current state of this model")
        grads = {}
        dy = as_tensor(dlogits)
        for i in range(len(self.layers) - 1, -1, -1):
            dy, layer_grads = self.layers[i].backward(caches[i], dy)
            for role, g in layer_grads.items():
                grads[f"{i}.{role}"] = g
        return {path: grads[path] for path in self.parameters()}


def _split(path):
    index, _, role = str(path).partition(".")
    return int(index), role


def forward(model, x, mode="train"):
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    return model.forward(x, training=mode == "train")


def backward(model, caches, dlogits):
    return model.backward(caches, dlogits)
