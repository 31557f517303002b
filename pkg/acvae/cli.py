"""Command-line entry point: fetch, verify-data, train, sweep, generate."""

import argparse
import asyncio
import logging
import shlex
import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from pydantic import ValidationError

from . import __version__
from ._http import AsyncMnistDownloader, MnistDownloader
from ._settings import AcvaeSettings
from .checkpoint import load_checkpoint
from .evaluation import (
    ImageGrid,
    example_grid,
    sampling_grid,
    style_transfer_grid,
    write_grid_manifest,
    write_pgm,
)
from .exceptions import (
    EXIT_CONFIG,
    EXIT_DATA,
    AcvaeError,
    ConfigurationError,
    DataError,
    UnsupportedModeError,
)
from .mnist import load_mnist, load_split
from .models import AdamConfig, GridManifest, ModelConfig, TrainingConfig
from .runs import GRIDS_DIR, run_training
from .stochastic import Rng
from .sweep import cell_name, default_grid, normalize_cell, tradeoff_sweep, write_sweep_csv
from .types import CensorMode, ConditioningMode, GridTask, RngStream

__all__ = ["main", "build_parser", "parse_grid_file"]

logger = logging.getLogger(__name__)

EXPECTED_COUNTS = {"train": 60_000, "test": 10_000}
SWEEP_CSV = "sweep.csv"


def _add_model_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=[m.value for m in ConditioningMode], default="full")
    parser.add_argument("--censor", choices=[c.value for c in CensorMode], default="none")
    parser.add_argument("--lambda", dest="lam", type=float, default=0.0)
    parser.add_argument("--gamma", type=float, default=1.0)


def _add_run_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--epochs", type=int, default=100)
    parser.add_argument("--batch", type=int, default=100, help="Batch size")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--k", type=int, default=1, help="Latent samples per item")
    parser.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    parser.add_argument("--train-subset", type=int, default=None, metavar="N")
    parser.add_argument("--data", type=Path, default=None, help="MNIST directory")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(
        prog="acvae", description="Censored conditional VAEs on MNIST"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None, help="Logging level (default from env)")
    sub = parser.add_subparsers(dest="command", required=True)

    fetch = sub.add_parser("fetch", help="Download the MNIST IDX files")
    fetch.add_argument("--data", type=Path, default=None)
    fetch.add_argument("--overwrite", action="store_true")
    fetch.add_argument("--sequential", action="store_true", help="One file at a time")
    fetch.set_defaults(handler=cmd_fetch)

    verify = sub.add_parser("verify-data", help="Parse and summarize the MNIST files")
    verify.add_argument("--data", type=Path, default=None)
    verify.set_defaults(handler=cmd_verify_data)

    train = sub.add_parser("train", help="Train one configuration")
    _add_model_arguments(train)
    _add_run_arguments(train)
    train.set_defaults(handler=cmd_train)

    sweep = sub.add_parser("sweep", help="Train a grid of configurations")
    _add_run_arguments(sweep)
    sweep.add_argument("--grid", type=Path, default=None, help="One flag set per line")
    sweep.add_argument("--jobs", type=int, default=1)
    sweep.set_defaults(handler=cmd_sweep)

    generate = sub.add_parser("generate", help="Render image grids from a checkpoint")
    generate.add_argument("--checkpoint", type=Path, required=True)
    generate.add_argument("--task", choices=[t.value for t in GridTask], required=True)
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--rows", type=int, default=10)
    generate.add_argument("--cols", type=int, default=10)
    generate.add_argument("--count", type=int, default=10, help="Examples in a transfer grid")
    generate.add_argument("--data", type=Path, default=None)
    generate.add_argument("--out", type=Path, default=None)
    generate.set_defaults(handler=cmd_generate)
    return parser


def _training_config(args: argparse.Namespace, model: ModelConfig) -> TrainingConfig:
    return TrainingConfig(
        model=model,
        adam=AdamConfig(lr=args.lr),
        epochs=args.epochs,
        batch_size=args.batch,
        seed=args.seed,
        train_subset=args.train_subset,
    )


def _model_config(args: argparse.Namespace, k: int = 1) -> ModelConfig:
    return ModelConfig(
        mode=ConditioningMode(args.mode),
        censor=CensorMode(args.censor),
        lam=args.lam,
        gamma=args.gamma,
        k=k,
    )


def parse_grid_file(path: Path, k: int = 1) -> list[ModelConfig]:
    """Read a sweep grid: one `--mode M --censor C [--lambda L] [--gamma G]` set per line.

    Blank lines and lines starting with '#' are ignored; duplicate cells collapse.

    Raises:
        ConfigurationError: If a line does not describe a valid configuration
    """
    cell_parser = argparse.ArgumentParser(prog="grid", add_help=False, exit_on_error=False)
    _add_model_arguments(cell_parser)
    try:
        lines = path.read_text().splitlines()
    except OSError as e:
        raise ConfigurationError(f"cannot read grid file {path}: {e}") from e

    models: list[ModelConfig] = []
    seen: set[str] = set()
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            args, extra = cell_parser.parse_known_args(shlex.split(line))
            if extra:
                raise ValueError(f"unexpected arguments: {' '.join(extra)}")
            model = normalize_cell(_model_config(args, k))
        except (argparse.ArgumentError, ValidationError, ValueError) as e:
            raise ConfigurationError(f"{path}:{number}: {_one_line(e)}") from e
        name = cell_name(model)
        if name not in seen:
            seen.add(name)
            models.append(model)
    if not models:
        raise ConfigurationError(f"{path}: grid is empty")
    return models


def cmd_fetch(args: argparse.Namespace, settings: AcvaeSettings) -> int:
    data_dir = args.data or settings.data_dir
    if args.sequential:
        with MnistDownloader(
            settings.mnist_url, settings.download_timeout, settings.max_retries
        ) as downloader:
            paths = downloader.download(data_dir, overwrite=args.overwrite)
    else:

        async def fetch_all() -> list[Path]:
            async with AsyncMnistDownloader(
                settings.mnist_url, settings.download_timeout, settings.max_retries
            ) as downloader:
                return await downloader.download(data_dir, overwrite=args.overwrite)

        paths = asyncio.run(fetch_all())
    print(f"fetched {len(paths)} files into {data_dir}")
    return 0


def cmd_verify_data(args: argparse.Namespace, settings: AcvaeSettings) -> int:
    data_dir = args.data or settings.data_dir
    splits = {split: load_split(data_dir, split) for split in EXPECTED_COUNTS}
    print(" ".join(f"{split}={len(ds)}" for split, ds in splits.items()))
    for split, ds in splits.items():
        histogram = " ".join(f"{c}:{n}" for c, n in enumerate(ds.class_histogram()))
        print(f"{split} classes {histogram}")
    for split, expected in EXPECTED_COUNTS.items():
        if len(splits[split]) != expected:
            raise DataError(f"{split}: expected {expected} items, found {len(splits[split])}")
    return 0


def cmd_train(args: argparse.Namespace, settings: AcvaeSettings) -> int:
    config = _training_config(args, _model_config(args, args.k))
    out_dir = args.out or settings.out_dir / cell_name(config.model)
    train_set, test_set = load_mnist(args.data or settings.data_dir)
    result = run_training(config, train_set, test_set, out_dir)
    final = result.history[-1]
    print(
        f"elbo={final.elbo:.4f} adv_acc={final.adv_acc:.4f} "
        f"mi_estimate={final.mi_estimate:.4f} out={out_dir}"
    )
    return 0


def cmd_sweep(args: argparse.Namespace, settings: AcvaeSettings) -> int:
    base = _training_config(args, ModelConfig(k=args.k))
    if args.grid is not None:
        configs = [base.model_copy(update={"model": m}) for m in parse_grid_file(args.grid, args.k)]
    else:
        configs = default_grid(base)
    out_dir = args.out or settings.out_dir
    train_set, test_set = load_mnist(args.data or settings.data_dir)
    logger.info(f"Sweeping {len(configs)} cells with {args.jobs} jobs into {out_dir}")

    rows = tradeoff_sweep(configs, train_set, test_set, out_dir=out_dir, jobs=args.jobs)
    write_sweep_csv(rows, out_dir / SWEEP_CSV)
    failed = sum(row.error is not None for row in rows)
    print(f"{len(rows) - failed}/{len(rows)} cells succeeded; results in {out_dir / SWEEP_CSV}")
    return 0 if failed < len(rows) else 1


def cmd_generate(args: argparse.Namespace, settings: AcvaeSettings) -> int:
    task = GridTask(args.task)
    for flag in ("rows", "cols", "count"):
        if getattr(args, flag) < 1:
            raise ConfigurationError(f"--{flag} must be at least 1")
    if args.seed < 0:
        raise ConfigurationError("--seed must be non-negative")
    networks, manifest = load_checkpoint(args.checkpoint)
    mode = manifest.mode
    out_dir = args.out or args.checkpoint.parent
    rng = Rng(args.seed).substream(RngStream.SAMPLE)
    digit_classes: list[int]

    grid: ImageGrid
    if task is GridTask.SAMPLE:
        grid = sampling_grid(networks.decoder, mode, rng, rows=args.rows, cols=args.cols)
        digit_classes = [c % networks.decoder.d_s for c in range(args.cols)]
    else:
        if task is GridTask.TRANSFER and not mode.decoder_conditioned:
            raise UnsupportedModeError(mode.value, task.value)
        test_set = load_split(args.data or settings.data_dir, "test")
        if task is GridTask.TRANSFER:
            picked = test_set.take(rng.substream(0).permutation(len(test_set))[: args.count])
            grid = style_transfer_grid(
                networks.encoder, networks.decoder, picked, mode, rng.substream(1)
            )
            digit_classes = [int(label) for label in picked.labels]
        else:
            grid = example_grid(test_set, args.rows, args.cols, rng)
            digit_classes = []

    grid_manifest = GridManifest(
        task=task,
        checkpoint=str(args.checkpoint),
        seed=args.seed,
        rows=grid.rows,
        cols=grid.cols,
        digit_classes=digit_classes,
        mode=mode,
    )
    grids = out_dir / GRIDS_DIR
    write_pgm(grid, grids / f"{task.value}.pgm")
    write_grid_manifest(grid_manifest, grids / f"{task.value}.json")
    print(f"wrote {grids / f'{task.value}.pgm'}")
    return 0


def _one_line(error: Exception) -> str:
    if isinstance(error, ValidationError):
        first = error.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        return f"{location}: {first['msg']}" if location else str(first["msg"])
    return str(error).splitlines()[0] if str(error) else type(error).__name__


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = AcvaeSettings()
    level = (args.log_level or settings.log_level).upper()
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    handler: Callable[[argparse.Namespace, AcvaeSettings], int] = args.handler
    try:
        return handler(args, settings)
    except ValidationError as e:
        print(f"error: {_one_line(e)}", file=sys.stderr)
        return EXIT_CONFIG
    except AcvaeError as e:
        print(f"error: {e.message}", file=sys.stderr)
        return e.exit_code
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
