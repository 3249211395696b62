"""Central finite differences, kept independent of the analytic backward code."""
import numpy as np


def numeric_grad(f, x, h=1e-5):
    """d f / d x for scalar ``f`` of array ``x`` (perturbed in place, then restored)."""
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + h
        fp = f()
        x[i] = old - h
        fm = f()
        x[i] = old
        grad[i] = (fp - fm) / (2 * h)
    return grad


def max_rel_error(analytic, numeric, floor=1e-6):
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def kink_margin(x, kind_variant, k=None):
    """Distance of a batch from the non-differentiable set of L1 / TopK sigma."""
    dev = np.abs(x - x.mean(axis=0))
    margin = dev.min()
    if kind_variant == "topk" and k is not None and k < x.shape[0]:
        s = -np.sort(-dev, axis=0)
        margin = min(margin, (s[k - 1] - s[k]).min())
    return margin
