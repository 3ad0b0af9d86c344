"""Dataset loading and deterministic mini-batch planning.

IDX is the canonical binary container for the digit data: a 4-byte
big-endian magic (0x00000803 for images with three dims, 0x00000801 for
labels with one dim), one 4-byte big-endian size per dimension, then raw
unsigned bytes. Pixels are scaled by 1/255 into [0,1]; whether the
original experiments normalized or centered inputs is unstated, so this
choice is a documented assumption.

The synthetic two-cluster dataset is a seconds-fast stand-in for CI; its
Gaussian values are not confined to [0,1] (only IDX-loaded pixel data
carries that guarantee).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .linalg import Matrix, SplitMix64

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    """The file does not conform to the IDX container format."""


@dataclass
class Dataset:
    inputs: Matrix  # (n, d)
    labels: np.ndarray  # (n,) int64 class indices
    num_classes: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValueError(
                f"{self.inputs.shape[0]} inputs but {self.labels.shape[0]} labels"
            )
        if self.labels.size and (
            self.labels.min() < 0 or self.labels.max() >= self.num_classes
        ):
            raise ValueError(
                f"labels must lie in [0, {self.num_classes}), got range "
                f"[{self.labels.min()}, {self.labels.max()}]"
            )

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def subset(self, n: int) -> "Dataset":
        """First n examples, file order preserved."""
        return Dataset(self.inputs[:n].copy(), self.labels[:n].copy(), self.num_classes)


def _read_idx(path: str, expected_magic: int, expected_dims: int) -> tuple[tuple[int, ...], np.ndarray]:
    with open(path, "rb") as f:
        raw = f.read()
    header_len = 4 + 4 * expected_dims
    if len(raw) < header_len:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != expected_magic:
        raise IdxFormatError(
            f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
        )
    dims = struct.unpack(f">{expected_dims}I", raw[4:header_len])
    count = int(np.prod(dims))
    body = raw[header_len:]
    if len(body) != count:
        raise IdxFormatError(
            f"{path}: expected {count} data bytes for dims {dims}, found {len(body)}"
        )
    return dims, np.frombuffer(body, dtype=np.uint8)


def load_idx(images_path: str, labels_path: str, num_classes: int | None = None) -> Dataset:
    """Load an images/labels IDX pair into a Dataset with [0,1] inputs."""
    img_dims, pixels = _read_idx(images_path, IMAGES_MAGIC, expected_dims=3)
    lbl_dims, labels = _read_idx(labels_path, LABELS_MAGIC, expected_dims=1)
    n, rows, cols = img_dims
    if lbl_dims[0] != n:
        raise IdxFormatError(
            f"image count {n} does not match label count {lbl_dims[0]}"
        )
    inputs = pixels.astype(np.float64).reshape(n, rows * cols) / 255.0
    k = num_classes if num_classes is not None else int(labels.max()) + 1
    return Dataset(inputs, labels.astype(np.int64), k)


@dataclass
class BatchPlan:
    """One epoch's shuffled batch schedule over [0, n)."""

    permutation: np.ndarray
    batch_size: int
    seed: int

    @property
    def num_batches(self) -> int:
        n = len(self.permutation)
        return (n + self.batch_size - 1) // self.batch_size

    def batches(self):
        """Yield index arrays; the last batch may be short, never dropped."""
        for start in range(0, len(self.permutation), self.batch_size):
            yield self.permutation[start : start + self.batch_size]


def make_batches(n: int, batch_size: int, rng: SplitMix64) -> BatchPlan:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    return BatchPlan(rng.permutation(n), batch_size, rng.seed)


def synthetic_dataset(n: int, rng: SplitMix64) -> Dataset:
    """Two 8-D Gaussian clusters (means +-0.5, std 0.3), balanced labels."""
    if n < 10:
        raise ValueError(f"n must be >= 10, got {n}")
    dim = 8
    labels = np.arange(n, dtype=np.int64) % 2
    centers = np.where(labels[:, None] == 0, -0.5, 0.5)
    inputs = centers + 0.3 * rng.normal(n, dim)
    return Dataset(inputs, labels, num_classes=2)
