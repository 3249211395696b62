"""Versioned JSON container for trained models."""
from __future__ import annotations

import json

import numpy as np

from .exceptions import FormatError
from .network.layers import BatchNorm, layer_from_config
from .network.model import SequentialModel

MAGIC = "BNROBUST-MODEL"
VERSION = 1


def _tensor(a):
    return {"shape": list(a.shape), "data": [float(v) for v in np.ravel(a)]}


def _array(obj):
    return np.array(obj["data"], dtype=np.float64).reshape(obj["shape"])


def model_to_dict(model, metadata=None):
    layers = []
    for layer in model.layers:
        entry = {"type": layer.kind, "config": layer.config(),
                 "params": {role: _tensor(v) for role, v in layer.params.items()}}
        if isinstance(layer, BatchNorm):
            entry["buffers"] = {name: _tensor(v) for name, v in layer.buffers.items()}
        layers.append(entry)
    return {"magic": MAGIC, "version": VERSION, "metadata": metadata or {}, "layers": layers}


def model_from_dict(doc):
    if doc.get("magic") != MAGIC:
        raise FormatError(f"not a model file (magic={doc.get('magic')!r})")
    if doc.get("version") != VERSION:
        raise FormatError(f"unsupported model file version {doc.get('version')!r}")
    layers = []
    for entry in doc["layers"]:
        layer = layer_from_config(entry["type"], entry["config"])
        for role, t in entry["params"].items():
            layer.set_param(role, _array(t))
        if isinstance(layer, BatchNorm):
            layer.bn.running_mean = _array(entry["buffers"]["running_mean"])
            layer.bn.running_sigma = _array(entry["buffers"]["running_sigma"])
        layers.append(layer)
    return SequentialModel(layers)


def save_model(model, path, metadata=None):
    with open(path, "w") as fh:
        json.dump(model_to_dict(model, metadata), fh, separators=(",", ":"), sort_keys=True)
        fh.write("\n")


def load_model(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc.msg}", offset=exc.pos) from exc
    model = model_from_dict(doc)
    return model, doc.get("metadata", {})
