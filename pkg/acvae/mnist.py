"""MNIST IDX parsing, normalization, one-hot encoding and shuffled batching.

IDX layout (all integers big-endian):

    [offset] [type]          [value]
    0000     32 bit integer  0x00000803 (images) / 0x00000801 (labels)
    0004     32 bit integer  number of items
    0008     32 bit integer  rows             (images only)
    0012     32 bit integer  columns          (images only)
    ....     unsigned byte   payload, row-major

Gzip-wrapped files are detected by their 0x1f 0x8b prefix and unwrapped.
"""

import gzip
import logging
import struct
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import (
    ArtifactIOError,
    BadMagicError,
    DataError,
    DataFileNotFoundError,
    LabelOutOfRangeError,
    TrailingBytesError,
    TruncatedFileError,
)
from .stochastic import Rng
from .types import LabelArray, PixelArray, Tensor

__all__ = [
    "IMAGES_MAGIC",
    "LABELS_MAGIC",
    "MNIST_FILES",
    "Dataset",
    "Batch",
    "parse_idx_images",
    "parse_idx_labels",
    "write_idx_images",
    "write_idx_labels",
    "normalize",
    "one_hot",
    "batches",
    "load_split",
    "load_mnist",
]

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
GZIP_PREFIX = b"\x1f\x8b"
NUM_CLASSES = 10

# split -> (images file, labels file)
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _unwrap(data: bytes) -> bytes:
    if data[:2] == GZIP_PREFIX:
        try:
            return gzip.decompress(data)
        except (OSError, EOFError) as e:
            raise DataError(f"corrupt gzip stream: {e}") from e
    return data


def _read_header(data: bytes, magic: int, count: int) -> tuple[int, ...]:
    if len(data) < 4:
        raise TruncatedFileError(expected=4, got=len(data))
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise BadMagicError(found=found, expected=magic)
    size = 4 * (count + 1)
    if len(data) < size:
        raise TruncatedFileError(expected=size, got=len(data))
    return struct.unpack(f">{count}I", data[4:size])


def _payload(data: bytes, offset: int, expected: int) -> bytes:
    got = len(data) - offset
    if got < expected:
        raise TruncatedFileError(expected=offset + expected, got=len(data))
    if got > expected:
        raise TrailingBytesError(count=got - expected)
    return data[offset:]


def parse_idx_images(data: bytes) -> PixelArray:
    """Parse an IDX image file into an (n, rows * cols) uint8 array.

    Raises:
        BadMagicError: If the magic is not 0x00000803
        TruncatedFileError: If the payload is shorter than declared
        TrailingBytesError: If bytes follow the declared payload
    """
    data = _unwrap(data)
    n, rows, cols = _read_header(data, IMAGES_MAGIC, 3)
    payload = _payload(data, 16, n * rows * cols)
    return np.frombuffer(payload, dtype=np.uint8).reshape(n, rows * cols).copy()


def parse_idx_labels(data: bytes, num_classes: int = NUM_CLASSES) -> LabelArray:
    """Parse an IDX label file.

    Raises:
        BadMagicError: If the magic is not 0x00000801
        TruncatedFileError: If fewer labels are present than declared
        TrailingBytesError: If bytes follow the declared labels
        LabelOutOfRangeError: If a label is not below num_classes
    """
    data = _unwrap(data)
    (n,) = _read_header(data, LABELS_MAGIC, 1)
    labels = np.frombuffer(_payload(data, 8, n), dtype=np.uint8).astype(np.int64)
    bad = np.flatnonzero(labels >= num_classes)
    if bad.size:
        raise LabelOutOfRangeError(value=int(labels[bad[0]]), index=int(bad[0]))
    return labels


def write_idx_images(images: PixelArray, rows: int, cols: int, *, compress: bool = False) -> bytes:
    """Serialize (n, rows * cols) uint8 images as an IDX file."""
    flat = np.ascontiguousarray(images, dtype=np.uint8).reshape(-1, rows * cols)
    data = struct.pack(">4I", IMAGES_MAGIC, flat.shape[0], rows, cols) + flat.tobytes()
    return gzip.compress(data, mtime=0) if compress else data


def write_idx_labels(labels: LabelArray, *, compress: bool = False) -> bytes:
    """Serialize labels as an IDX file."""
    payload = np.asarray(labels, dtype=np.uint8).tobytes()
    data = struct.pack(">2I", LABELS_MAGIC, len(payload)) + payload
    return gzip.compress(data, mtime=0) if compress else data


def normalize(raw: PixelArray) -> Tensor:
    """Scale 0-255 pixels to [0, 1] by exact division."""
    return raw.astype(np.float64) / 255.0


def one_hot(labels: LabelArray, num_classes: int = NUM_CLASSES) -> Tensor:
    encoded = np.zeros((labels.shape[0], num_classes), dtype=np.float64)
    encoded[np.arange(labels.shape[0]), labels] = 1.0
    return encoded


@dataclass(frozen=True, eq=False)
class Dataset:
    """Images in [0, 1] with their class labels."""

    images: Tensor
    labels: LabelArray
    num_classes: int = NUM_CLASSES

    def __post_init__(self) -> None:
        if self.images.ndim != 2 or self.images.shape[0] != self.labels.shape[0]:
            raise DataError(
                f"{self.images.shape[0]} images but {self.labels.shape[0]} labels"
            )
        if self.images.size and (self.images.min() < 0.0 or self.images.max() > 1.0):
            raise DataError("pixel values must lie in [0, 1]")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, n: int) -> "Dataset":
        """The first n items."""
        return Dataset(self.images[:n], self.labels[:n], self.num_classes)

    def take(self, indices: LabelArray) -> "Dataset":
        return Dataset(self.images[indices], self.labels[indices], self.num_classes)

    def class_histogram(self) -> list[int]:
        return [int(c) for c in np.bincount(self.labels, minlength=self.num_classes)]


@dataclass(frozen=True, eq=False)
class Batch:
    """Training pairs (x_i, s_i) with s one-hot encoded."""

    x: Tensor
    s: LabelArray
    s_onehot: Tensor

    @classmethod
    def from_dataset(cls, ds: Dataset, indices: LabelArray | slice) -> "Batch":
        labels = ds.labels[indices]
        return cls(x=ds.images[indices], s=labels, s_onehot=one_hot(labels, ds.num_classes))

    def __len__(self) -> int:
        return int(self.s.shape[0])


def batches(ds: Dataset, batch_size: int, rng: Rng) -> Iterator[Batch]:
    """One epoch of shuffled batches; the final short batch is kept."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    order = rng.permutation(len(ds))
    for start in range(0, len(ds), batch_size):
        yield Batch.from_dataset(ds, order[start : start + batch_size])


def _read_file(data_dir: Path, stem: str) -> bytes:
    for name in (stem, f"{stem}.gz"):
        path = data_dir / name
        if path.is_file():
            try:
                return path.read_bytes()
            except OSError as e:
                raise ArtifactIOError(path, e) from e
    raise DataFileNotFoundError(data_dir / f"{stem}[.gz]")


def load_split(data_dir: Path | str, split: str) -> Dataset:
    """Load the 'train' or 'test' split from a directory of (optionally gzipped) IDX files."""
    images_stem, labels_stem = MNIST_FILES[split]
    data_dir = Path(data_dir)
    raw = parse_idx_images(_read_file(data_dir, images_stem))
    labels = parse_idx_labels(_read_file(data_dir, labels_stem))
    if raw.shape[0] != labels.shape[0]:
        raise DataError(f"{split}: {raw.shape[0]} images but {labels.shape[0]} labels")
    logger.info(f"Loaded {split} split: {raw.shape[0]} items from {data_dir}")
    return Dataset(images=normalize(raw), labels=labels)


def load_mnist(data_dir: Path | str) -> tuple[Dataset, Dataset]:
    """(train, test) datasets."""
    return load_split(data_dir, "train"), load_split(data_dir, "test")
