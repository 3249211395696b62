"""Proportional Gaussian weight perturbation and normalized-accuracy metrics.

Each perturbable tensor ``w`` is replaced by ``w + N(0, (eta * std(w))**2)``
where ``std(w)`` is the population standard deviation of the clean tensor.
Accuracy under noise is averaged over repeated trials and divided by the
clean (baseline) accuracy; the mean of those ratios over every non-zero
``eta`` summarizes a model's noise resistance in a single number.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DegenerateInputError, ParameterError
from .network.training import evaluate_accuracy
from .tensor import SeededRng, gaussian

DEFAULT_ETAS = (0.01, 0.04, 0.08, 0.12, 0.16, 0.20)


@dataclass
class NoiseSweepConfig:
    etas: list = field(default_factory=lambda: list(DEFAULT_ETAS))
    repeats: int = 20
    seed: int = 0
    perturb_biases: bool = False
    perturb_bn_params: bool = False

    def __post_init__(self):
        etas = [float(e) for e in self.etas]
        if not etas:
            raise ConfigError("etas must not be empty")
        if any(not (e >= 0 and math.isfinite(e)) for e in etas):
            raise ConfigError(f"etas must be finite and non-negative, got {etas}")
        self.etas = sorted(set(etas))
        if isinstance(self.repeats, bool) or int(self.repeats) != self.repeats or self.repeats < 1:
            raise ConfigError(f"repeats must be a positive integer, got {self.repeats!r}")
        self.repeats = int(self.repeats)
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")

    def to_dict(self):
        return {
            "etas": list(self.etas),
            "repeats": self.repeats,
            "seed": self.seed,
            "perturb_biases": self.perturb_biases,
            "perturb_bn_params": self.perturb_bn_params,
        }


@dataclass(frozen=True)
class LayerNoiseStats:
    path: str
    sigma_w: float
    sigma_noise: float
    count: int

    @property
    def snr(self):
        return math.inf if self.sigma_noise == 0 else self.sigma_w / self.sigma_noise


def perturbable_paths(model, perturb_biases=False, perturb_bn_params=False):
    groups = {"weight"}
    if perturb_biases:
        groups.add("bias")
    if perturb_bn_params:
        groups.add("norm")
    return [path for path, group in model.parameter_roles().items() if group in groups]


def layer_weight_std(model, perturb_biases=False, perturb_bn_params=False):
    """Population standard deviation of every perturbable tensor, by path."""
    paths = perturbable_paths(model, perturb_biases, perturb_bn_params)
    if not paths:
        raise ConfigError("model has no perturbable parameter tensors")
    return {path: float(np.std(model.get_parameter(path))) for path in paths}


def noise_stats(model, eta, sigma_w=None):
    """Per-tensor noise scale at ``eta``, relative to the clean weights."""
    if sigma_w is None:
        sigma_w = layer_weight_std(model)
    return [
        LayerNoiseStats(path, s, eta * s, int(model.get_parameter(path).size))
        for path, s in sigma_w.items()
    ]


def inject_noise(model, eta, rng, sigma_w=None, perturb_biases=False, perturb_bn_params=False):
    """Return a perturbed copy of ``model``; ``model`` itself is left untouched.

    ``sigma_w`` defaults to the clean model's per-tensor spread; pass the
    precomputed map to guarantee every trial scales noise by the same
    reference.
    """
    if not eta >= 0:
        raise ParameterError(f"eta must be non-negative, got {eta}")
    if sigma_w is None:
        sigma_w = layer_weight_std(model, perturb_biases, perturb_bn_params)
    noisy = model.copy()
    for path, s in sigma_w.items():
        std = eta * s
        if std == 0:
            continue
        w = noisy.get_parameter(path)
        w += gaussian(rng, w.shape, 0.0, std)
    noisy.mark_updated()
    return noisy


def normalized_accuracy(a_avg, a_o):
    if a_o <= 0:
        raise DegenerateInputError("baseline accuracy must be positive to normalize")
    return a_avg / a_o


def average_normalized_accuracy(per_eta):
    values = list(per_eta)
    if not values:
        raise DegenerateInputError("need at least one normalized accuracy")
    return math.fsum(values) / len(values)


@dataclass
class EtaResult:
    eta: float
    trials: list
    mean_accuracy: float
    normalized_accuracy: float


@dataclass
class SweepResult:
    baseline: float
    per_eta: list
    a_avr: float | None
    sigma_w: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    sizes: dict = field(default_factory=dict)

    @property
    def etas(self):
        return [r.eta for r in self.per_eta]

    @property
    def normalized(self):
        return {r.eta: r.normalized_accuracy for r in self.per_eta}

    def layer_stats(self):
        return {
            r.eta: [LayerNoiseStats(p, s, r.eta * s, self.sizes.get(p, 0)) for p, s in self.sigma_w.items()]
            for r in self.per_eta
        }

    def to_dict(self):
        return {
            "baseline_accuracy": self.baseline,
            "a_avr": self.a_avr,
            "per_eta": [
                {
                    "eta": r.eta,
                    "snr": None if r.eta == 0 else 1.0 / r.eta,
                    "mean_accuracy": r.mean_accuracy,
                    "normalized_accuracy": r.normalized_accuracy,
                    "trials": list(r.trials),
                }
                for r in self.per_eta
            ],
            "sigma_w": dict(self.sigma_w),
            "sizes": dict(self.sizes),
            "config": dict(self.config),
        }

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    def write_trials_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eta", "trial", "accuracy"])
            for r in self.per_eta:
                for t, acc in enumerate(r.trials):
                    w.writerow([fmt(r.eta), t, fmt(acc)])

    def write_summary_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["eta", "mean_accuracy", "normalized_accuracy"])
            for r in self.per_eta:
                w.writerow([fmt(r.eta), fmt(r.mean_accuracy), fmt(r.normalized_accuracy)])


def fmt(value):
    return f"{value:.6g}"


def summarize(baseline, trials_by_eta, sigma_w=None, config=None, sizes=None):
    """Assemble a :class:`SweepResult` from raw trial accuracies."""
    per_eta = []
    for eta in sorted(trials_by_eta):
        trials = [float(a) for a in trials_by_eta[eta]]
        if not trials:
            raise DegenerateInputError(f"no trials recorded for eta={eta}")
        mean = math.fsum(trials) / len(trials)
        per_eta.append(EtaResult(float(eta), trials, mean, normalized_accuracy(mean, baseline)))
    nonzero = [r.normalized_accuracy for r in per_eta if r.eta > 0]
    a_avr = average_normalized_accuracy(nonzero) if nonzero else None
    return SweepResult(baseline, per_eta, a_avr, dict(sigma_w or {}), dict(config or {}), dict(sizes or {}))


def run_sweep(model, dataset, cfg, threads=1):
    """Evaluate ``model`` under every ``eta`` in ``cfg``, ``cfg.repeats`` times each.

    Trial ``t`` at the ``i``-th eta draws from the child stream ``(i, t)`` of
    ``cfg.seed``, so results do not depend on ``threads`` or scheduling.
    """
    if len(dataset) == 0:
        raise DegenerateInputError("cannot sweep on an empty dataset")
    sigma_w = layer_weight_std(model, cfg.perturb_biases, cfg.perturb_bn_params)
    baseline = evaluate_accuracy(model, dataset)
    root = SeededRng(cfg.seed)

    def trial(job):
        i, t = job
        eta = cfg.etas[i]
        if eta == 0:
            return baseline
        noisy = inject_noise(model, eta, root.child(i, t), sigma_w)
        return evaluate_accuracy(noisy, dataset)

    jobs = [(i, t) for i in range(len(cfg.etas)) for t in range(cfg.repeats)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            accs = list(pool.map(trial, jobs))
    else:
        accs = [trial(job) for job in jobs]

    trials_by_eta = {eta: [] for eta in cfg.etas}
    for (i, _), acc in zip(jobs, accs):
        trials_by_eta[cfg.etas[i]].append(acc)
    sizes = {path: int(model.get_parameter(path).size) for path in sigma_w}
    return summarize(baseline, trials_by_eta, sigma_w, cfg.to_dict(), sizes)


def read_trials_csv(path):
    """Parse a trials CSV; rows with ``eta == 0`` define the baseline."""
    trials = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            trials.setdefault(float(row["eta"]), []).append(float(row["accuracy"]))
    if 0.0 not in trials:
        raise ConfigError(f"{path}: trials CSV needs eta=0 rows to define the baseline")
    baseline = math.fsum(trials[0.0]) / len(trials[0.0])
    return baseline, trials
