"""Experiment configuration: one JSON document per run.

Example::

    {
      "seed": 0,
      "model": {"arch": "mlp", "hidden": [64, 64], "norm": "l1"},
      "data": {"kind": "blobs", "n_train": 1000, "n_test": 1000, "classes": 6, "spread": 0.35},
      "sgd": {"learning_rate": 0.05, "batch_size": 32, "epochs": 30},
      "sweep": {"etas": [0.01, 0.04, 0.08, 0.12, 0.16, 0.2], "repeats": 20},
      "out": "runs/l1"
    }

``seed`` seeds initialization, data generation, shuffling and the noise
sweep through separate child streams unless a section sets its own.
"""
from __future__ import annotations

import copy
import json
import os
from dataclasses import dataclass, field

from .exceptions import BNRobustError, ConfigError
from .network.data import Dataset, load_idx, make_blobs
from .network.training import SgdConfig
from .network.zoo import build_cnn, build_mlp
from .noise import NoiseSweepConfig
from .norm import NormKind
from .tensor import SeededRng

DEFAULT_MODEL = {"arch": "mlp", "hidden": [64, 64], "norm": "l2", "momentum": 0.1}
DEFAULT_DATA = {"kind": "blobs", "n_train": 1000, "n_test": 1000, "classes": 6, "spread": 0.35, "radius": 1.0}

# child-stream ids under the experiment seed
_STREAM_INIT, _STREAM_TRAIN_DATA, _STREAM_TEST_DATA, _STREAM_SGD, _STREAM_SWEEP = range(5)


def _derive(seed, stream):
    return int(SeededRng(seed).child(stream).generator.integers(0, 2**63))


@dataclass
class ExperimentConfig:
    seed: int = 0
    model: dict = field(default_factory=lambda: dict(DEFAULT_MODEL))
    data: dict = field(default_factory=lambda: dict(DEFAULT_DATA))
    sgd: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    gradnoise: dict = field(default_factory=dict)
    out: str | None = None

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        self.model = {**DEFAULT_MODEL, **self.model}
        defaults = DEFAULT_DATA if self.data.get("kind", "blobs") == "blobs" else {}
        self.data = {**defaults, **self.data}
        try:
            # validate eagerly so bad values fail at load time
            self.norm_kind()
            self.sgd_config()
            self.sweep_config()
        except BNRobustError as exc:
            raise ConfigError(str(exc)) from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config value: {exc}") from exc
        if self.model["arch"] not in ("mlp", "cnn"):
            raise ConfigError(f"unknown architecture {self.model['arch']!r}")
        kind = self.data.get("kind")
        if kind == "idx":
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                if key not in self.data:
                    raise ConfigError(f"idx data needs {key!r}")
                if not os.path.exists(self.data[key]):
                    raise ConfigError(f"data file not found: {self.data[key]}")
        elif kind != "blobs":
            raise ConfigError(f"unknown data kind {kind!r}")

    @classmethod
    def from_dict(cls, doc):
        known = {"seed", "model", "data", "sgd", "sweep", "gradnoise", "out"}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**copy.deepcopy(doc))

    @classmethod
    def load(cls, path):
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(doc)

    def to_dict(self):
        return {"seed": self.seed, "model": self.model, "data": self.data,
                "sgd": self.sgd, "sweep": self.sweep, "gradnoise": self.gradnoise, "out": self.out}

    def with_overrides(self, seed=None, norm=None, out=None):
        doc = copy.deepcopy(self.to_dict())
        if seed is not None:
            doc["seed"] = int(seed)
        if norm is not None:
            doc["model"]["norm"] = norm
        if out is not None:
            doc["out"] = out
        return ExperimentConfig.from_dict(doc)

    def norm_kind(self):
        norm = self.model.get("norm")
        if norm is None:
            return None
        extra = {key: self.model[key] for key in ("eps", "k", "l1_scale") if key in self.model}
        return NormKind.parse(norm, **extra)

    def sgd_config(self):
        return SgdConfig(**{"seed": _derive(self.seed, _STREAM_SGD), **self.sgd})

    def sweep_config(self):
        return NoiseSweepConfig(**{"seed": _derive(self.seed, _STREAM_SWEEP), **self.sweep})

    def build_model(self, dataset):
        m = self.model
        seed = m.get("init_seed", _derive(self.seed, _STREAM_INIT))
        kind = self.norm_kind()
        if m["arch"] == "mlp":
            in_features = dataset.inputs.reshape(len(dataset), -1).shape[1]
            return build_mlp(in_features, m["hidden"], dataset.num_classes, kind, seed, m["momentum"])
        return build_cnn(dataset.inputs.shape[1:], tuple(m.get("channels", (8, 16))),
                         m.get("dense", 32), dataset.num_classes, kind, seed,
                         m.get("kernel_size", 3), m.get("stride", 2), m["momentum"])

    def load_data(self):
        """Return ``(train, test)`` datasets."""
        d = self.data
        if d["kind"] == "blobs":
            seed = d.get("seed", self.seed)
            train = make_blobs(SeededRng(seed).child(_STREAM_TRAIN_DATA), d["n_train"],
                               d["classes"], d["spread"], d["radius"])
            test = make_blobs(SeededRng(seed).child(_STREAM_TEST_DATA), d["n_test"],
                              d["classes"], d["spread"], d["radius"])
            return train, test
        classes = d.get("classes")
        train = load_idx(d["train_images"], d["train_labels"], classes, d.get("limit_train"))
        test = load_idx(d["test_images"], d["test_labels"], classes or train.num_classes,
                        d.get("limit_test"))
        if self.model["arch"] == "mlp":
            train = _flatten(train)
            test = _flatten(test)
        return train, test


def _flatten(ds):
    return Dataset(ds.inputs.reshape(len(ds), -1), ds.labels, ds.num_classes)


def comparison_key(config):
    """Config contents that must agree for a fair norm-variant comparison."""
    doc = copy.deepcopy(config.to_dict())
    for key in ("norm", "k", "eps", "l1_scale"):
        doc["model"].pop(key, None)
    doc.pop("out", None)
    return json.dumps(doc, sort_keys=True)
