"""Dense float64 arithmetic helpers and a splittable seeded random source.

Arrays are plain ``numpy.ndarray`` objects of dtype float64; the helpers
here only add the shape checks and error types the rest of the package
relies on.
"""
from __future__ import annotations

import numpy as np

from .exceptions import DegenerateInputError, DimensionError, ParameterError

DTYPE = np.float64


def as_tensor(x, ndim=None, name="x"):
    arr = np.asarray(x, dtype=DTYPE)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"{name} must have rank {ndim}, got shape {arr.shape}")
    return arr


def matmul(a, b):
    """Matrix product of two rank-2 arrays."""
    a = as_tensor(a, 2, "a")
    b = as_tensor(b, 2, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner extents differ: {a.shape} x {b.shape}")
    return a @ b


def mean_axis0(x):
    """Per-column mean of an ``(m, d)`` batch."""
    x = as_tensor(x, 2)
    if x.shape[0] == 0:
        raise DegenerateInputError("cannot take the mean of an empty batch")
    return x.sum(axis=0) / x.shape[0]


class SeededRng:
    """Deterministic random stream with independent child streams.

    Streams are keyed by ``(seed, path)`` through :class:`numpy.random.SeedSequence`,
    so ``child(i)`` never overlaps ``child(j)`` for ``i != j`` and does not
    depend on how much the parent has already been consumed.
    """

    def __init__(self, seed=0, path=()):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self.path = tuple(int(p) for p in path)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(seed, spawn_key=self.path))
        )

    def child(self, *index):
        return SeededRng(self.seed, self.path + tuple(index))

    @property
    def generator(self):
        return self._gen

    def permutation(self, n):
        return self._gen.permutation(n)

    def uniform(self, low, high, shape):
        return self._gen.uniform(low, high, size=shape).astype(DTYPE, copy=False)

    def choice(self, n, size, replace=False):
        return self._gen.choice(n, size=size, replace=replace)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, path={self.path})"


def gaussian(rng, shape, mean=0.0, std=1.0):
    """I.i.d. normal samples; ``std == 0`` returns a constant array."""
    if not std >= 0:
        raise ParameterError(f"std must be non-negative, got {std}")
    if std == 0:
        return np.full(shape, mean, dtype=DTYPE)
    return rng.generator.normal(mean, std, size=shape)
