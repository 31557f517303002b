"""Checkpoint file format.

    b"ACVAE" + version byte
    uint32 LE manifest length, manifest JSON (CheckpointManifest)
    per layer in declared order, weight then bias:
        uint64 LE byte length, float64 LE values (row-major)
"""

import logging
import os
import struct
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .exceptions import ArtifactIOError, CheckpointError, CheckpointVersionError
from .models import CheckpointManifest, LayerSpec, TrainingConfig
from .networks import Networks, build_networks

__all__ = ["FORMAT_VERSION", "MAGIC", "save_checkpoint", "load_checkpoint"]

logger = logging.getLogger(__name__)

MAGIC = b"ACVAE"
FORMAT_VERSION = 1
_LE_FLOAT = np.dtype("<f8")


def _encode(networks: Networks, config: TrainingConfig, epoch: int) -> bytes:
    layers = [layer for net in networks.all() for layer in net.layers]
    manifest = CheckpointManifest(
        config=config,
        mode=config.model.mode,
        censor=config.model.censor,
        seed=config.seed,
        epoch=epoch,
        layers=[LayerSpec(name=ly.name, in_dim=ly.in_dim, out_dim=ly.out_dim) for ly in layers],
    )
    header = manifest.model_dump_json().encode("utf-8")
    parts = [MAGIC, bytes([FORMAT_VERSION]), struct.pack("<I", len(header)), header]
    for layer in layers:
        for param in (layer.weight, layer.bias):
            block = np.ascontiguousarray(param, dtype=_LE_FLOAT).tobytes()
            parts.append(struct.pack("<Q", len(block)))
            parts.append(block)
    return b"".join(parts)


def save_checkpoint(
    path: Path | str,
    networks: Networks,
    config: TrainingConfig,
    epoch: int,
) -> None:
    """Write networks and their configuration atomically.

    Raises:
        ArtifactIOError: If the file cannot be written
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp.write_bytes(_encode(networks, config, epoch))
        os.replace(tmp, path)
    except OSError as e:
        raise ArtifactIOError(path, e) from e
    logger.info(f"Saved checkpoint (epoch {epoch}) to {path}")


def load_checkpoint(path: Path | str) -> tuple[Networks, CheckpointManifest]:
    """Rebuild the networks stored in a checkpoint.

    Raises:
        ArtifactIOError: If the file cannot be read
        CheckpointVersionError: If the format version differs
        CheckpointError: If the file is malformed
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ArtifactIOError(path, e) from e

    if data[: len(MAGIC)] != MAGIC or len(data) < len(MAGIC) + 5:
        raise CheckpointError(f"{path}: not an acvae checkpoint")
    version = data[len(MAGIC)]
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(found=version, expected=FORMAT_VERSION)
    pos = len(MAGIC) + 1
    (header_len,) = struct.unpack_from("<I", data, pos)
    pos += 4
    try:
        manifest = CheckpointManifest.model_validate_json(data[pos : pos + header_len])
    except ValidationError as e:
        raise CheckpointError(f"{path}: invalid manifest: {e.error_count()} errors") from e
    pos += header_len

    networks = build_networks(manifest.config.model, None)
    layers = [layer for net in networks.all() for layer in net.layers]
    declared = [(s.name, s.in_dim, s.out_dim) for s in manifest.layers]
    actual = [(ly.name, ly.in_dim, ly.out_dim) for ly in layers]
    if declared != actual:
        raise CheckpointError(f"{path}: layer list does not match the embedded config")

    for layer in layers:
        for param in (layer.weight, layer.bias):
            if pos + 8 > len(data):
                raise CheckpointError(f"{path}: truncated before {layer.name}")
            (size,) = struct.unpack_from("<Q", data, pos)
            pos += 8
            if size != param.size * 8 or pos + size > len(data):
                raise CheckpointError(f"{path}: bad parameter block for {layer.name}")
            values = np.frombuffer(data, dtype=_LE_FLOAT, count=param.size, offset=pos)
            param[...] = values.reshape(param.shape)
            pos += size
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    logger.info(f"Loaded checkpoint from {path} (epoch {manifest.epoch})")
    return networks, manifest
