"""Tradeoff sweeps over lambda and gamma."""

import csv
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .evaluation import read_metrics_csv
from .exceptions import AcvaeError, ArtifactIOError
from .mnist import Dataset
from .models import SWEEP_COLUMNS, ModelConfig, SweepRow, TrainingConfig
from .runs import METRICS_NAME, read_manifest, run_training
from .training import train
from .types import CensorMode, ConditioningMode

__all__ = [
    "CONDITIONED_LAMBDAS",
    "CONDITIONED_GAMMAS",
    "BASIC_LAMBDAS",
    "BASIC_GAMMAS",
    "normalize_cell",
    "cell_name",
    "default_grid",
    "tradeoff_sweep",
    "write_sweep_csv",
    "read_sweep_csv",
]

logger = logging.getLogger(__name__)

CONDITIONED_LAMBDAS = (0.0, 1.0, 2.0, 5.0, 10.0, 20.0)
CONDITIONED_GAMMAS = (1.0, 2.0, 4.0, 8.0)
BASIC_LAMBDAS = (0.0, 10.0, 20.0, 50.0, 100.0)
BASIC_GAMMAS = (1.0, 10.0, 20.0, 50.0)


def normalize_cell(model: ModelConfig) -> ModelConfig:
    """Map lambda = 0 and gamma = 1 runs onto the single uncensored baseline."""
    if model.is_baseline and model.censor is not CensorMode.NONE:
        return model.model_copy(update={"censor": CensorMode.NONE, "lam": 0.0, "gamma": 1.0})
    return model


def cell_name(model: ModelConfig) -> str:
    """Output directory name of a sweep cell, e.g. 'full-adv-20'."""
    return f"{model.mode.value}-{model.censor.value}-{model.censor_param:g}"


def default_grid(base: TrainingConfig) -> list[TrainingConfig]:
    """Every mode crossed with its lambda and gamma grids, baseline shared."""
    configs: list[TrainingConfig] = []
    seen: set[str] = set()
    for mode in ConditioningMode:
        lambdas, gammas = (
            (BASIC_LAMBDAS, BASIC_GAMMAS)
            if mode is ConditioningMode.BASIC
            else (CONDITIONED_LAMBDAS, CONDITIONED_GAMMAS)
        )
        candidates = [
            ModelConfig(mode=mode, censor=CensorMode.ADVERSARIAL, lam=lam) for lam in lambdas
        ] + [ModelConfig(mode=mode, censor=CensorMode.KL, gamma=gamma) for gamma in gammas]
        for candidate in candidates:
            model = normalize_cell(
                candidate.model_copy(
                    update={
                        "d_x": base.model.d_x,
                        "d_z": base.model.d_z,
                        "d_s": base.model.d_s,
                        "hidden": base.model.hidden,
                        "k": base.model.k,
                    }
                )
            )
            name = cell_name(model)
            if name not in seen:
                seen.add(name)
                configs.append(base.model_copy(update={"model": model}))
    return configs


def _final_row(config: TrainingConfig, out_dir: Path | None) -> SweepRow | None:
    if out_dir is None:
        return None
    manifest = read_manifest(out_dir)
    if manifest is None or not manifest.finalized:
        return None
    if manifest.config != config:
        logger.warning(f"Retraining {out_dir.name}: finished run has a different configuration")
        return None
    try:
        history = read_metrics_csv(out_dir / METRICS_NAME)
    except ArtifactIOError:
        return None
    if not history:
        return None
    logger.info(f"Skipping finished cell {out_dir.name}")
    final = history[-1]
    return _row(config, final.elbo, final.adv_acc, final.adv_ce, final.mi_estimate)


def _row(
    config: TrainingConfig,
    elbo: float | None,
    adv_acc: float | None,
    adv_ce: float | None,
    mi: float | None,
    error: str | None = None,
) -> SweepRow:
    return SweepRow(
        mode=config.model.mode,
        censor=config.model.censor,
        param=config.model.censor_param,
        elbo=elbo,
        adv_acc=adv_acc,
        adv_ce=adv_ce,
        mi_estimate=mi,
        seed=config.seed,
        epochs=config.epochs,
        error=error,
    )


def _run_cell(
    config: TrainingConfig,
    train_set: Dataset,
    test_set: Dataset | None,
    out_root: Path | None,
) -> SweepRow:
    out_dir = out_root / cell_name(config.model) if out_root is not None else None
    finished = _final_row(config, out_dir)
    if finished is not None:
        return finished
    try:
        if out_dir is not None:
            result = run_training(config, train_set, test_set, out_dir)
        else:
            result = train(config, train_set, test_set)
    except AcvaeError as e:
        logger.warning(f"Sweep cell {cell_name(config.model)} failed: {e.message}")
        return _row(config, None, None, None, None, error=e.message)
    except Exception as e:
        logger.exception(f"Sweep cell {cell_name(config.model)} failed unexpectedly")
        return _row(config, None, None, None, None, error=f"{type(e).__name__}: {e}")
    final = result.history[-1]
    return _row(config, final.elbo, final.adv_acc, final.adv_ce, final.mi_estimate)


def tradeoff_sweep(
    configs: Sequence[TrainingConfig],
    train_set: Dataset,
    test_set: Dataset | None = None,
    *,
    out_dir: Path | None = None,
    jobs: int = 1,
) -> list[SweepRow]:
    """Train every configuration and collect final-epoch metrics, one row per run.

    Runs are independent (own RNG, own output directory) and execute on up to
    `jobs` threads. A failed run yields a row with its error set; the sweep
    continues. Cells whose output directory holds a finalized manifest of the
    same configuration are not retrained; any other content is overwritten.
    """
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        futures = [
            pool.submit(_run_cell, config, train_set, test_set, out_dir) for config in configs
        ]
        return [future.result() for future in futures]


def write_sweep_csv(rows: Sequence[SweepRow], path: Path | str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(SWEEP_COLUMNS)
            writer.writerows(row.csv_row() for row in rows)
    except OSError as e:
        raise ArtifactIOError(path, e) from e
    logger.info(f"Wrote {len(rows)} sweep rows to {path}")


def read_sweep_csv(path: Path | str) -> list[SweepRow]:
    """Parse a sweep CSV; ERROR cells come back as rows with error set."""
    path = Path(path)
    rows: list[SweepRow] = []
    try:
        with path.open(newline="") as f:
            for raw in csv.DictReader(f):
                failed = raw["elbo"] == "ERROR"
                metrics = {
                    key: None if failed else float(raw[key])
                    for key in ("elbo", "adv_acc", "adv_ce", "mi_estimate")
                }
                rows.append(
                    SweepRow(
                        mode=ConditioningMode(raw["mode"]),
                        censor=CensorMode(raw["censor"]),
                        param=float(raw["param"]),
                        seed=int(raw["seed"]),
                        epochs=int(raw["epochs"]),
                        error="ERROR" if failed else None,
                        **metrics,
                    )
                )
    except OSError as e:
        raise ArtifactIOError(path, e) from e
    return rows
