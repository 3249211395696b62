"""Cross-entropy loss, plain SGD and the training loop."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..exceptions import ContractError, DivergenceError, ParameterError
from ..tensor import SeededRng
from ..validation import check_labels, check_positive

logger = logging.getLogger(__name__)


def loss_softmax_ce(logits, labels):
    """Mean cross-entropy and its gradient w.r.t. ``logits``."""
    logits = np.asarray(logits, dtype=np.float64)
    m, c = logits.shape
    labels = check_labels(labels, c, m)
    shifted = logits - logits.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - logsumexp[:, None]
    rows = np.arange(m)
    loss = -log_probs[rows, labels].mean()
    dlogits = np.exp(log_probs)
    dlogits[rows, labels] -= 1.0
    return float(loss), dlogits / m


def sgd_step(model, grads, learning_rate):
    params = model.parameters()
    if set(grads) != set(params):
        missing = sorted(set(params) - set(grads))
        extra = sorted(set(grads) - set(params))
        raise ContractError(f"gradient keys mismatch: missing={missing} extra={extra}")
    for path, p in params.items():
        p -= learning_rate * grads[path]
    model.mark_updated()


@dataclass
class SgdConfig:
    learning_rate: float = 0.05
    batch_size: int = 32
    epochs: int = 50
    seed: int = 0

    def __post_init__(self):
        check_positive(self.learning_rate, "learning_rate")
        check_positive(self.batch_size, "batch_size", integer=True)
        if isinstance(self.epochs, bool) or int(self.epochs) != self.epochs or self.epochs < 0:
            raise ParameterError(f"epochs must be a non-negative integer, got {self.epochs!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ParameterError(f"seed must be a non-negative integer, got {self.seed!r}")

    def to_dict(self):
        return asdict(self)


@dataclass
class TrainingLog:
    epochs: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    accuracy: list = field(default_factory=list)

    def append(self, epoch, loss, accuracy):
        self.epochs.append(epoch)
        self.loss.append(loss)
        self.accuracy.append(accuracy)

    def rows(self):
        return list(zip(self.epochs, self.loss, self.accuracy))


def iter_minibatches(n, batch_size, rng):
    """Shuffled index batches that cover ``range(n)`` once.

    A trailing batch of a single sample is folded into the previous one,
    since batch statistics of one sample are degenerate.
    """
    order = rng.permutation(n)
    starts = list(range(0, n, batch_size))
    if len(starts) > 1 and n - starts[-1] == 1:
        starts.pop()
    for i, start in enumerate(starts):
        stop = starts[i + 1] if i + 1 < len(starts) else n
        yield order[start:stop]


def train(model, dataset, cfg):
    """Train ``model`` in place with mini-batch SGD; returns a :class:`TrainingLog`."""
    log = TrainingLog()
    x, y = dataset.inputs, dataset.labels
    base = SeededRng(cfg.seed)
    for epoch in range(1, cfg.epochs + 1):
        rng = base.child(epoch)
        total = 0.0
        for idx in iter_minibatches(len(y), cfg.batch_size, rng):
            logits, caches = model.forward(x[idx], training=True)
            loss, dlogits = loss_softmax_ce(logits, y[idx])
            if not np.isfinite(loss):
                raise DivergenceError(epoch, loss)
            total += loss * len(idx)
            sgd_step(model, model.backward(caches, dlogits), cfg.learning_rate)
        epoch_loss = total / len(y)
        acc = evaluate_accuracy(model, dataset)
        logger.debug("epoch %d loss %.6f acc %.4f", epoch, epoch_loss, acc)
        log.append(epoch, epoch_loss, acc)
    return log


def predict_classes(model, inputs, batch_size=1024):
    out = []
    for start in range(0, len(inputs), batch_size):
        logits = model.predict_logits(inputs[start:start + batch_size])
        out.append(np.argmax(logits, axis=1))
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate_accuracy(model, dataset, batch_size=1024):
    """Fraction of samples whose arg-max logit equals the label."""
    if len(dataset.labels) == 0:
        return 0.0
    pred = predict_classes(model, dataset.inputs, batch_size)
    return float(np.mean(pred == dataset.labels))
