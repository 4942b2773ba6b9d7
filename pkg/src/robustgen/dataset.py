"""IDX (MNIST container) parsing, seeded subsets and synthetic blobs."""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rng import Stream

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
_NDIM = {IMAGE_MAGIC: 3, LABEL_MAGIC: 1}
EFFECTIVE_DIM = 10


class IdxError(ValueError):
    pass


class BadMagicError(IdxError):
    pass


class TruncatedError(IdxError):
    pass


class TrailingBytesError(IdxError):
    pass


@dataclass(frozen=True)
class IdxTensor:
    dims: tuple[int, ...]
    payload: np.ndarray  # uint8, shape == dims

    @property
    def magic(self) -> int:
        return IMAGE_MAGIC if len(self.dims) == 3 else LABEL_MAGIC


def parse_idx(data: bytes) -> IdxTensor:
    if len(data) < 4:
        raise TruncatedError("stream shorter than the magic number")
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in _NDIM:
        raise BadMagicError(f"unsupported magic 0x{magic:08x}")
    ndim = _NDIM[magic]
    header = 4 + 4 * ndim
    if len(data) < header:
        raise TruncatedError("stream ends inside the dimension header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    have = len(data) - header
    if have < size:
        raise TruncatedError(f"payload has {have} bytes, expected {size}")
    if have > size:
        raise TrailingBytesError(f"{have - size} bytes after the payload")
    payload = np.frombuffer(data, dtype=np.uint8, offset=header).reshape(dims)
    return IdxTensor(tuple(dims), payload)


def serialize_idx(t: IdxTensor) -> bytes:
    if len(t.dims) not in (1, 3):
        raise IdxError("only 1-D label and 3-D image tensors are supported")
    head = struct.pack(f">I{len(t.dims)}I", t.magic, *t.dims)
    return head + np.ascontiguousarray(t.payload, dtype=np.uint8).tobytes()


def read_idx(path) -> IdxTensor:
    return parse_idx(Path(path).read_bytes())


def write_idx(path, t: IdxTensor):
    Path(path).write_bytes(serialize_idx(t))


@dataclass(frozen=True)
class ImageDataset:
    features: np.ndarray  # (n, d) in [0, 1]
    labels: np.ndarray  # (n,) ints in [0, classes)
    classes: int
    source: str = "idx_file"
    seed_used: int | None = None

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64).ravel()
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError("features and labels disagree on n")
        if X.size and (X.min() < 0.0 or X.max() > 1.0):
            raise ValueError("features must be scaled to [0, 1]")
        if y.size and (y.min() < 0 or y.max() >= self.classes):
            raise ValueError("labels out of range")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def take(self, idx) -> "ImageDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return ImageDataset(self.features[idx], self.labels[idx], self.classes, self.source, self.seed_used)


def dataset_from_idx(images: IdxTensor, labels: IdxTensor, classes: int = 10) -> ImageDataset:
    if len(images.dims) != 3 or len(labels.dims) != 1:
        raise IdxError("expected a 3-D image tensor and a 1-D label tensor")
    if images.dims[0] != labels.dims[0]:
        raise IdxError("image and label counts differ")
    X = images.payload.reshape(images.dims[0], -1).astype(np.float64) / 255.0
    return ImageDataset(X, labels.payload.astype(np.int64), classes, "idx_file")


def load_idx_dataset(images_path, labels_path, classes: int = 10) -> ImageDataset:
    return dataset_from_idx(read_idx(images_path), read_idx(labels_path), classes)


def sample_subset(ds: ImageDataset, n: int, seed: int) -> ImageDataset:
    """n rows drawn without replacement by partial Fisher-Yates on Stream(seed, n)."""
    if n < 1 or n > ds.n:
        raise ValueError(f"cannot draw {n} rows from a dataset of {ds.n}")
    idx = Stream(seed, n).sample_indices(ds.n, n)
    sub = ds.take(idx)
    return ImageDataset(sub.features, sub.labels, sub.classes, sub.source, seed)


def synthetic_blobs(d: int, classes: int, n: int, spread: float, seed: int) -> ImageDataset:
    """Gaussian clusters centred on the first ``classes`` coordinate axes.

    Sample i belongs to class i mod classes. A single global affine map sends
    the features into [0, 1] (so inter-point geometry is only rescaled).
    """
    if min(d, classes, n) < 1 or spread <= 0:
        raise ValueError("d, classes, n and spread must be positive")
    if classes > d:
        raise ValueError(f"{classes} classes need at least {classes} axes for distinct means, got d={d}")
    labels = np.arange(n) % classes
    means = np.eye(d)[labels]
    X = means + spread * Stream(seed).normal((n, d))
    lo, hi = X.min(), X.max()
    X = (X - lo) / (hi - lo) if hi > lo else np.zeros_like(X)
    return ImageDataset(np.clip(X, 0.0, 1.0), labels, classes, "synthetic", seed)


def to_idx_pair(ds: ImageDataset, rows: int, cols: int) -> tuple[IdxTensor, IdxTensor]:
    """Quantise a [0, 1] dataset back into image/label IDX tensors."""
    if rows * cols != ds.dim:
        raise ValueError("rows * cols must equal the feature width")
    pix = np.rint(ds.features * 255.0).astype(np.uint8).reshape(ds.n, rows, cols)
    return IdxTensor((ds.n, rows, cols), pix), IdxTensor((ds.n,), ds.labels.astype(np.uint8))
