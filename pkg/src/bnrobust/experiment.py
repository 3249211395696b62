"""Train / sweep / compare / gradient-noise runs driven by :class:`ExperimentConfig`."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass

from . import gradnoise
from .config import comparison_key
from .exceptions import ConfigError, DimensionError
from .network.data import Dataset
from .network.training import train
from .noise import fmt, read_trials_csv, run_sweep, summarize
from .serialization import load_model, save_model

MODEL_FILE = "model.json"
TRAIN_LOG = "train_log.csv"
TRIALS_CSV = "sweep_trials.csv"
SUMMARY_CSV = "sweep_summary.csv"
SWEEP_JSON = "sweep.json"
COMPARE_CSV = "compare.csv"
COMPARE_TXT = "compare.txt"
GRADNOISE_JSON = "gradnoise.json"


def _outdir(config, out):
    out = out or config.out
    if not out:
        raise ConfigError("no output directory: pass --out or set 'out' in the config")
    os.makedirs(out, exist_ok=True)
    return out


def train_model(config):
    """Build and train the configured model; returns ``(model, log, train, test)``."""
    train_ds, test_ds = config.load_data()
    model = config.build_model(train_ds)
    log = train(model, train_ds, config.sgd_config())
    return model, log, train_ds, test_ds


def write_train_log(log, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "loss", "accuracy"])
        for epoch, loss, acc in log.rows():
            w.writerow([epoch, fmt(loss), fmt(acc)])


def cmd_train(config, out=None):
    out = _outdir(config, out)
    model, log, _, _ = train_model(config)
    save_model(model, os.path.join(out, MODEL_FILE), metadata={"config": config.to_dict()})
    write_train_log(log, os.path.join(out, TRAIN_LOG))
    return model, log


def write_sweep(result, out):
    result.write_trials_csv(os.path.join(out, TRIALS_CSV))
    result.write_summary_csv(os.path.join(out, SUMMARY_CSV))
    result.write_json(os.path.join(out, SWEEP_JSON))


def _check_compatible(model, dataset):
    try:
        model.predict_logits(dataset.inputs[:1])
    except DimensionError as exc:
        raise ConfigError(f"model does not fit the dataset: {exc}") from exc
    logits = model.predict_logits(dataset.inputs[:1])
    if logits.shape[1] != dataset.num_classes:
        raise ConfigError(f"model has {logits.shape[1]} outputs, dataset has {dataset.num_classes} classes")


def cmd_sweep(config, model_path, out=None, threads=1):
    out = _outdir(config, out)
    model, _ = load_model(model_path)
    _, test_ds = config.load_data()
    _check_compatible(model, test_ds)
    result = run_sweep(model, test_ds, config.sweep_config(), threads=threads)
    write_sweep(result, out)
    return result


def sweep_from_trials(trials_csv, out):
    """Recompute summaries from an existing trials CSV (eta=0 rows give the baseline)."""
    os.makedirs(out, exist_ok=True)
    baseline, trials = read_trials_csv(trials_csv)
    result = summarize(baseline, trials)
    write_sweep(result, out)
    return result


@dataclass
class ComparisonRow:
    norm: str
    seed: int
    baseline: float
    normalized: dict
    a_avr: float | None


def compare(configs, seeds=None, threads=1):
    """Train and sweep every config (per seed); configs may differ only in norm."""
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configs")
    keys = {comparison_key(c) for c in configs}
    if len(keys) != 1:
        raise ConfigError("configs differ in more than the batch-norm variant")
    seeds = [configs[0].seed] if seeds is None else list(seeds)
    rows = []
    for seed in seeds:
        for base in configs:
            cfg = base.with_overrides(seed=seed)
            model, _, _, test_ds = train_model(cfg)
            result = run_sweep(model, test_ds, cfg.sweep_config(), threads=threads)
            rows.append(ComparisonRow(str(cfg.norm_kind()), seed, result.baseline,
                                      result.normalized, result.a_avr))
    return rows


def comparison_table(rows):
    etas = sorted({eta for r in rows for eta in r.normalized})
    header = ["norm", "seed", "baseline"] + [f"A@{fmt(e)}" for e in etas] + ["A_avr"]
    body = []
    for r in rows:
        a_avr = "" if r.a_avr is None else fmt(r.a_avr)
        body.append([r.norm, str(r.seed), fmt(r.baseline)]
                    + [fmt(r.normalized[e]) if e in r.normalized else "" for e in etas] + [a_avr])
    return header, body


def format_table(header, body):
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in [header] + body]
    return "\n".join(lines) + "\n"


def cmd_compare(configs, out, seeds=None, threads=1):
    os.makedirs(out, exist_ok=True)
    rows = compare(configs, seeds, threads)
    header, body = comparison_table(rows)
    with open(os.path.join(out, COMPARE_CSV), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)
    text = format_table(header, body)
    with open(os.path.join(out, COMPARE_TXT), "w") as fh:
        fh.write(text)
    return rows, text


def _quadratic_fixture(spec):
    data = [float(v) for v in spec.get("data", [-1.0, 1.0])]
    model = gradnoise.ScalarQuadratic(spec.get("w", 0.0), spec.get("scale", 1.0))
    ds = Dataset([[v] for v in data], [0] * len(data), 1)
    return model, ds


def cmd_gradnoise(config, model_path=None, out=None):
    out = _outdir(config, out)
    g = dict(config.gradnoise)
    fixture = g.pop("fixture", None)
    if fixture is not None:
        if fixture.get("kind", "quadratic") != "quadratic":
            raise ConfigError(f"unknown gradnoise fixture {fixture.get('kind')!r}")
        model, ds = _quadratic_fixture(fixture)
    else:
        if model_path is None:
            raise ConfigError("gradnoise needs --model or a 'fixture' in the gradnoise section")
        model, _ = load_model(model_path)
        ds, _ = config.load_data()
        _check_compatible(model, ds)
        if "max_samples" in g:
            ds = ds.subset(slice(0, int(g.pop("max_samples"))))
    alpha = float(g.get("alpha", config.sgd_config().learning_rate))
    batch_size = int(g.get("batch_size", config.sgd_config().batch_size))
    trials = int(g.get("trials", 1000))
    est = gradnoise.check_bound(model, ds, alpha, batch_size, trials, seed=int(g.get("seed", config.seed)))
    report = {key: getattr(est, key) for key in
              ("C_hat", "error_mean_norm", "alpha", "batch_size", "empirical_lhs", "bound_rhs", "trials", "holds", "n")}
    with open(os.path.join(out, GRADNOISE_JSON), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    return report
