"""Datasets: synthetic Gaussian blobs and IDX-format image files."""
from __future__ import annotations

import gzip
import math
import struct
from dataclasses import dataclass

import numpy as np

from ..exceptions import DimensionError, FormatError, ParameterError
from ..tensor import gaussian
from ..validation import check_labels

# IDX element type codes -> (numpy big-endian dtype, byte width)
_IDX_TYPES = {
    0x08: (">u1", 1),
    0x09: (">i1", 1),
    0x0B: (">i2", 2),
    0x0C: (">i4", 4),
    0x0D: (">f4", 4),
    0x0E: (">f8", 8),
}


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        if self.inputs.ndim < 2:
            raise DimensionError(f"inputs must be at least 2-D, got shape {self.inputs.shape}")
        self.labels = check_labels(self.labels, self.num_classes, self.inputs.shape[0])

    def __len__(self):
        return len(self.labels)

    def subset(self, indices):
        return Dataset(self.inputs[indices], self.labels[indices], self.num_classes)


def blob_centers(classes, radius=1.0):
    angles = 2 * math.pi * np.arange(classes) / classes
    return radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)


def make_blobs(rng, n, classes, spread, radius=1.0):
    """``n`` 2-D points in ``classes`` isotropic clusters on a circle.

    Labels cycle through the classes so class counts differ by at most one.
    """
    if classes < 1 or n < classes:
        raise ParameterError(f"need n >= classes >= 1, got n={n}, classes={classes}")
    if spread < 0:
        raise ParameterError(f"spread must be non-negative, got {spread}")
    labels = np.arange(n) % classes
    labels = labels[rng.permutation(n)]
    points = blob_centers(classes, radius)[labels] + gaussian(rng, (n, 2), 0.0, spread)
    return Dataset(points, labels, classes)


def _open(path):
    path = str(path)
    if path.endswith(".gz"):
        with gzip.open(path, "rb") as fh:
            return fh.read()
    with open(path, "rb") as fh:
        return fh.read()


def parse_idx(buf):
    """Decode an IDX byte string into a numpy array of its native dtype."""
    if len(buf) < 4:
        raise FormatError("file too short for IDX magic", offset=len(buf))
    zero, type_code, ndim = struct.unpack(">HBB", buf[:4])
    if zero != 0 or type_code not in _IDX_TYPES or ndim == 0:
        raise FormatError(f"bad IDX magic 0x{int.from_bytes(buf[:4], 'big'):08x}", offset=0)
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise FormatError(f"truncated IDX header: need {header} bytes", offset=len(buf))
    dims = struct.unpack(f">{ndim}I", buf[4:header])
    dtype, width = _IDX_TYPES[type_code]
    need = header + width * math.prod(dims)
    if len(buf) < need:
        raise FormatError(f"truncated IDX payload: expected {need} bytes, got {len(buf)}", offset=len(buf))
    return np.frombuffer(buf, dtype=dtype, count=math.prod(dims), offset=header).reshape(dims)


def read_idx(path):
    return parse_idx(_open(path))


def load_idx(images_path, labels_path, num_classes=None, limit=None):
    """Load an image/label IDX pair; pixel bytes are scaled to ``[0, 1]``.

    Images come back as ``(n, 1, rows, cols)`` so they feed convolutional
    models directly.
    """
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3:
        raise FormatError(f"image file must be 3-D (n, rows, cols), got {images.ndim}-D", offset=3)
    if labels.ndim != 1:
        raise FormatError(f"label file must be 1-D, got {labels.ndim}-D", offset=3)
    if len(images) != len(labels):
        raise DimensionError(f"{len(images)} images but {len(labels)} labels")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    x = images.astype(np.float64)
    if images.dtype == np.dtype(">u1"):
        x /= 255.0
    labels = labels.astype(np.int64)
    if num_classes is None:
        num_classes = int(labels.max()) + 1 if len(labels) else 1
    return Dataset(x[:, None, :, :], labels, num_classes)


def write_idx(path, array):
    """Write a uint8 array as an IDX file (used for fixtures and exports)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(">HBB", 0, 0x08, array.ndim) + struct.pack(f">{array.ndim}I", *array.shape)
    with open(path, "wb") as fh:
        fh.write(header + array.tobytes())
