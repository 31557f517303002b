"""Output directories of training runs: manifest, metrics stream, checkpoint."""

import logging
import os
import subprocess
from datetime import datetime, timezone
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from .evaluation import append_metrics_row
from .exceptions import ArtifactIOError
from .mnist import Dataset
from .models import RunManifest, TrainingConfig
from .training import TrainingResult, train

__all__ = [
    "CHECKPOINT_NAME",
    "METRICS_NAME",
    "MANIFEST_NAME",
    "GRIDS_DIR",
    "version_string",
    "write_manifest",
    "read_manifest",
    "run_training",
]

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.acvae"
METRICS_NAME = "metrics.csv"
MANIFEST_NAME = "manifest.json"
GRIDS_DIR = "grids"


def version_string() -> str:
    """git-describe of the source tree, or the package version outside a checkout."""
    try:
        out = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
            check=True,
        )
        described = out.stdout.strip()
        if described:
            return described
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{__version__}"


def write_manifest(manifest: RunManifest, out_dir: Path) -> None:
    """Atomically (re)write out_dir/manifest.json."""
    path = out_dir / MANIFEST_NAME
    tmp = out_dir / (MANIFEST_NAME + ".tmp")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        tmp.write_text(manifest.model_dump_json(indent=2) + "\n")
        os.replace(tmp, path)
    except OSError as e:
        raise ArtifactIOError(path, e) from e


def read_manifest(out_dir: Path) -> RunManifest | None:
    """The manifest of out_dir, or None if absent or unreadable."""
    path = out_dir / MANIFEST_NAME
    if not path.is_file():
        return None
    try:
        return RunManifest.model_validate_json(path.read_text())
    except (OSError, ValidationError) as e:
        logger.warning(f"Ignoring unreadable manifest {path}: {e}")
        return None


def run_training(
    config: TrainingConfig,
    train_set: Dataset,
    test_set: Dataset | None,
    out_dir: Path,
) -> TrainingResult:
    """Train one configuration, writing manifest, metrics and checkpoint under out_dir.

    The manifest is written before training starts and finalized afterwards; a
    stale metrics file from an unfinished earlier attempt is replaced.
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = out_dir / METRICS_NAME
    checkpoint_path = out_dir / CHECKPOINT_NAME
    manifest = RunManifest(
        config=config,
        version=version_string(),
        seed=config.seed,
        started_at=datetime.now(timezone.utc),
        outputs={
            "checkpoint": CHECKPOINT_NAME,
            "metrics": METRICS_NAME,
            "grids": GRIDS_DIR,
        },
    )
    write_manifest(manifest, out_dir)
    metrics_path.unlink(missing_ok=True)

    logger.info(
        f"Training mode={config.model.mode.value} censor={config.model.censor.value} "
        f"param={config.model.censor_param:g} seed={config.seed} -> {out_dir}"
    )
    result = train(
        config,
        train_set,
        test_set,
        checkpoint_path=checkpoint_path,
        on_epoch=lambda record: append_metrics_row(metrics_path, record),
    )

    write_manifest(
        manifest.model_copy(update={"finished_at": datetime.now(timezone.utc), "finalized": True}),
        out_dir,
    )
    return result
