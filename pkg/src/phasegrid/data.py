"""Dataset construction: the synthetic 1-d task and IDX (MNIST-style) files."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IdxFormatError

# Stand-in values for the 4-point 1-d task; asymmetric on purpose so that
# fits are not degenerate. Override via SyntheticSpec for other targets.
DEFAULT_POINTS = ((-1.0, 0.2), (-0.5, -0.4), (0.5, 0.6), (1.0, -0.3))

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class Dataset:
    """Raw inputs (n x d) and targets (n x d_out); bias is added internally."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", np.atleast_2d(np.asarray(self.X, dtype=np.float64)))
        object.__setattr__(self, "Y", np.atleast_2d(np.asarray(self.Y, dtype=np.float64)))
        if self.X.shape[0] != self.Y.shape[0]:
            raise ConfigError(f"X has {self.X.shape[0]} rows but Y has {self.Y.shape[0]}")
        if self.X.shape[0] < 1:
            raise ConfigError("dataset must contain at least one sample")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def d_out(self) -> int:
        return self.Y.shape[1]


def augment(X: np.ndarray) -> np.ndarray:
    """Append the constant-1 bias column."""
    X = np.atleast_2d(X)
    return np.ascontiguousarray(np.column_stack([X, np.ones(X.shape[0])]))


@dataclass(frozen=True)
class SyntheticSpec:
    points: tuple = DEFAULT_POINTS

    def __post_init__(self):
        if len(self.points) == 0:
            raise ConfigError("synthetic spec needs at least one point")
        xs = [p[0] for p in self.points]
        if len(set(xs)) != len(xs):
            raise ConfigError(f"duplicate x values in synthetic spec: {xs}")


def synthetic_1d(spec: SyntheticSpec = SyntheticSpec()) -> Dataset:
    """The 1-d regression task (d = d_out = 1)."""
    pts = np.asarray(spec.points, dtype=np.float64)
    return Dataset(pts[:, :1], pts[:, 1:2])


def dataset_to_csv(data: Dataset, path):
    n_x, n_y = data.d, data.d_out
    header = ",".join([f"x{i}" for i in range(n_x)] + [f"y{i}" for i in range(n_y)])
    rows = np.column_stack([data.X, data.Y])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


# --- IDX format -------------------------------------------------------------

def _open_maybe_gzip(path, mode="rb"):
    with open(path, "rb") as fh:
        magic2 = fh.read(2)
    if magic2 == b"\x1f\x8b":
        return gzip.open(path, mode)
    return open(path, mode)


def _read_exact(fh, count, path):
    buf = fh.read(count)
    if len(buf) != count:
        raise IdxFormatError(f"{path}: truncated, wanted {count} bytes, got {len(buf)}")
    return buf


def load_idx(images_path, labels_path, limit: int) -> Dataset:
    """Load an IDX image/label pair as a flat-pixel, one-hot dataset.

    Pixels are scaled to [0, 1]; labels become one-hot rows of width 10.
    Accepts gzip-compressed files. Takes the first `limit` samples.
    """
    if limit < 1:
        raise ConfigError(f"limit must be >= 1, got {limit}")
    with _open_maybe_gzip(images_path) as fh:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, images_path))
        if magic != IDX_IMAGES_MAGIC:
            raise IdxFormatError(f"{images_path}: bad magic 0x{magic:08x}, expected 0x{IDX_IMAGES_MAGIC:08x}")
        take = min(limit, count)
        pixels = np.frombuffer(_read_exact(fh, take * rows * cols, images_path), dtype=np.uint8)
    with _open_maybe_gzip(labels_path) as fh:
        magic, lcount = struct.unpack(">II", _read_exact(fh, 8, labels_path))
        if magic != IDX_LABELS_MAGIC:
            raise IdxFormatError(f"{labels_path}: bad magic 0x{magic:08x}, expected 0x{IDX_LABELS_MAGIC:08x}")
        if lcount != count:
            raise IdxFormatError(f"image count {count} != label count {lcount}")
        labels = np.frombuffer(_read_exact(fh, take, labels_path), dtype=np.uint8)
    if limit > count:
        raise IdxFormatError(f"requested {limit} samples but files contain {count}")
    X = pixels.reshape(take, rows * cols).astype(np.float64) / 255.0
    if labels.max(initial=0) > 9:
        raise IdxFormatError(f"{labels_path}: label values above 9")
    Y = np.zeros((take, 10))
    Y[np.arange(take), labels] = 1.0
    return Dataset(X, Y)


def write_idx_images(path, images: np.ndarray):
    """Write a uint8 image stack (n x rows x cols) in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", IDX_LABELS_MAGIC, len(labels)))
        fh.write(labels.tobytes())
