"""Quantitative evaluation and image-grid artifacts."""

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import ArtifactIOError, DataError, UnsupportedModeError
from .mnist import Dataset, one_hot
from .models import METRICS_COLUMNS, GridManifest, MetricsRecord, ModelConfig
from .networks import (
    AdversaryNet,
    DecoderNet,
    EncoderNet,
    Networks,
    adversary_logits,
    decode,
    encode,
)
from .stochastic import (
    Rng,
    bernoulli_loglik,
    kl_standard_normal,
    mi_estimate,
    reparameterize,
    softmax_cross_entropy,
)
from .types import ConditioningMode, GridTask, PixelArray, Tensor

__all__ = [
    "eval_elbo",
    "eval_adversary",
    "evaluate",
    "ImageGrid",
    "style_transfer_grid",
    "sampling_grid",
    "example_grid",
    "write_pgm",
    "read_pgm",
    "write_grid_manifest",
    "append_metrics_row",
    "read_metrics_csv",
]

logger = logging.getLogger(__name__)


def _chunks(n: int, size: int) -> list[slice]:
    return [slice(start, min(start + size, n)) for start in range(0, n, size)]


def _elbo_terms(
    enc: EncoderNet,
    dec: DecoderNet,
    test: Dataset,
    mode: ConditioningMode,
    rng: Rng,
    chunk_size: int,
) -> tuple[float, float, float]:
    recon_sum = 0.0
    kl_sum = 0.0
    for part in _chunks(len(test), chunk_size):
        x = test.images[part]
        s_onehot = one_hot(test.labels[part], test.num_classes)
        post = encode(enc, x, s_onehot, mode, cache=False)
        z = reparameterize(post, rng).z
        y = decode(dec, z, s_onehot, mode, cache=False)
        recon_sum += float(bernoulli_loglik(x, y).sum())
        kl_sum += float(kl_standard_normal(post).sum())
    n = max(len(test), 1)
    recon, kl = recon_sum / n, kl_sum / n
    return recon - kl, recon, kl


def eval_elbo(
    enc: EncoderNet,
    dec: DecoderNet,
    test: Dataset,
    mode: ConditioningMode,
    rng: Rng,
    chunk_size: int = 1000,
) -> float:
    """Mean per-image ELBO (gamma = 1, one sample per item) over a dataset."""
    return _elbo_terms(enc, dec, test, mode, rng, chunk_size)[0]


def eval_adversary(
    adv: AdversaryNet,
    enc: EncoderNet,
    test: Dataset,
    mode: ConditioningMode,
    rng: Rng,
    chunk_size: int = 1000,
) -> tuple[float, float, float]:
    """Adversary (accuracy, cross-entropy, MI estimate) on one sampled z per item.

    Ties in the argmax go to the lowest class index.
    """
    correct = 0
    ce_sum = 0.0
    for part in _chunks(len(test), chunk_size):
        labels = test.labels[part]
        post = encode(enc, test.images[part], one_hot(labels, test.num_classes), mode, cache=False)
        logits = adversary_logits(adv, reparameterize(post, rng).z, cache=False)
        ce, _ = softmax_cross_entropy(logits, labels)
        ce_sum += float(ce.sum())
        correct += int((np.argmax(logits, axis=1) == labels).sum())
    n = max(len(test), 1)
    ce_mean = ce_sum / n
    return correct / n, ce_mean, mi_estimate(ce_mean, adv.out_dim)


def evaluate(
    networks: Networks,
    test: Dataset,
    config: ModelConfig,
    rng: Rng,
    epoch: int = 0,
    chunk_size: int = 1000,
) -> MetricsRecord:
    """ELBO and adversary metrics in one record (independent noise substreams)."""
    elbo, recon, kl = _elbo_terms(
        networks.encoder, networks.decoder, test, config.mode, rng.substream(0), chunk_size
    )
    acc, ce, mi = eval_adversary(
        networks.adversary, networks.encoder, test, config.mode, rng.substream(1), chunk_size
    )
    return MetricsRecord(
        epoch=epoch, elbo=elbo, recon=recon, kl=kl, adv_ce=ce, adv_acc=acc, mi_estimate=mi
    )


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """rows x cols square grayscale cells tiled into one 8-bit image."""

    rows: int
    cols: int
    cell: int
    pixels: PixelArray

    @classmethod
    def from_cells(cls, cells: Tensor, rows: int, cols: int) -> "ImageGrid":
        """Tile (rows * cols, side * side) values in [0, 1], row-major.

        Values are quantized as floor(v * 255 + 0.5), i.e. rounded half-up.
        """
        side = math.isqrt(cells.shape[1])
        if side * side != cells.shape[1]:
            raise DataError(f"cell width {cells.shape[1]} is not a square image")
        quantized = np.floor(np.clip(cells, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)
        tiled = (
            quantized.reshape(rows, cols, side, side)
            .transpose(0, 2, 1, 3)
            .reshape(rows * side, cols * side)
        )
        return cls(rows=rows, cols=cols, cell=side, pixels=tiled)

    @property
    def width(self) -> int:
        return self.cols * self.cell

    @property
    def height(self) -> int:
        return self.rows * self.cell


def style_transfer_grid(
    enc: EncoderNet,
    dec: DecoderNet,
    examples: Dataset,
    mode: ConditioningMode,
    rng: Rng,
) -> ImageGrid:
    """Originals in row 0, then one row per class s' decoded from each example's z.

    Raises:
        UnsupportedModeError: If the decoder is not conditioned on s
    """
    if not mode.decoder_conditioned:
        raise UnsupportedModeError(mode.value, GridTask.TRANSFER.value)
    n = len(examples)
    num_classes = examples.num_classes
    post = encode(enc, examples.images, one_hot(examples.labels, num_classes), mode, cache=False)
    z = reparameterize(post, rng).z
    rows = [examples.images]
    for digit in range(num_classes):
        s_onehot = one_hot(np.full(n, digit, dtype=np.int64), num_classes)
        rows.append(decode(dec, z, s_onehot, mode, cache=False))
    return ImageGrid.from_cells(np.concatenate(rows, axis=0), rows=num_classes + 1, cols=n)


def sampling_grid(
    dec: DecoderNet,
    mode: ConditioningMode,
    rng: Rng,
    rows: int = 10,
    cols: int = 10,
    *,
    z: Tensor | None = None,
) -> ImageGrid:
    """Decode prior samples z ~ N(0, I); column j is conditioned on class j (mod classes).

    Args:
        dec: Decoder
        mode: Conditioning mode (BASIC ignores the class)
        rng: Sampling stream
        rows: Grid rows
        cols: Grid columns
        z: Optional fixed latents of shape (rows * cols, d_z), row-major
    """
    num_classes = dec.d_s
    d_z = dec.in_dim - (num_classes if mode.decoder_conditioned else 0)
    if z is None:
        z = rng.normal((rows * cols, d_z))
    classes = np.tile(np.arange(cols) % num_classes, rows).astype(np.int64)
    y = decode(dec, z, one_hot(classes, num_classes), mode, cache=False)
    return ImageGrid.from_cells(y, rows=rows, cols=cols)


def example_grid(ds: Dataset, rows: int, cols: int, rng: Rng) -> ImageGrid:
    """Randomly chosen dataset images, for side-by-side comparison with samples."""
    picked = rng.permutation(len(ds))[: rows * cols]
    if picked.shape[0] < rows * cols:
        raise DataError(f"need {rows * cols} images, dataset has {len(ds)}")
    return ImageGrid.from_cells(ds.images[picked], rows=rows, cols=cols)


def write_pgm(grid: ImageGrid, path: Path | str) -> None:
    """Write a binary (P5) PGM file.

    Raises:
        ArtifactIOError: If the file cannot be written
    """
    path = Path(path)
    header = f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(header + np.ascontiguousarray(grid.pixels, dtype=np.uint8).tobytes())
    except OSError as e:
        raise ArtifactIOError(path, e) from e
    logger.info(f"Wrote {grid.rows}x{grid.cols} grid to {path}")


def read_pgm(path: Path | str) -> PixelArray:
    """Read an 8-bit binary PGM file into a (height, width) array."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ArtifactIOError(path, e) from e

    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos)
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise DataError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    magic, width, height, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic != b"P5" or maxval != 255:
        raise DataError(f"{path}: only 8-bit P5 PGM is supported")
    pixels = data[pos + 1 :]
    if len(pixels) != width * height:
        raise DataError(f"{path}: expected {width * height} pixel bytes, got {len(pixels)}")
    return np.frombuffer(pixels, dtype=np.uint8).reshape(height, width).copy()


def write_grid_manifest(manifest: GridManifest, path: Path | str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(manifest.model_dump_json(indent=2) + "\n")
    except OSError as e:
        raise ArtifactIOError(path, e) from e


def append_metrics_row(path: Path | str, record: MetricsRecord) -> None:
    """Append one epoch to a metrics CSV, writing the header for a new file."""
    path = Path(path)
    new = not path.exists()
    try:
        with path.open("a", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            if new:
                writer.writerow(METRICS_COLUMNS)
            writer.writerow(record.csv_row())
    except OSError as e:
        raise ArtifactIOError(path, e) from e


def read_metrics_csv(path: Path | str) -> list[MetricsRecord]:
    path = Path(path)
    try:
        with path.open(newline="") as f:
            return [MetricsRecord.model_validate(row) for row in csv.DictReader(f)]
    except OSError as e:
        raise ArtifactIOError(path, e) from e
