"""Pydantic models for configuration, reports and artifact manifests."""

import math
from datetime import datetime
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .types import CensorMode, ConditioningMode, GridTask

__all__ = [
    "AdamConfig",
    "ModelConfig",
    "TrainingConfig",
    "StepReport",
    "MetricsRecord",
    "RunManifest",
    "GridManifest",
    "SweepRow",
    "LayerSpec",
    "CheckpointManifest",
    "METRICS_COLUMNS",
    "SWEEP_COLUMNS",
]

METRICS_COLUMNS = ("epoch", "elbo", "recon", "kl", "adv_ce", "adv_acc", "mi_estimate")
SWEEP_COLUMNS = (
    "mode",
    "censor",
    "param",
    "elbo",
    "adv_acc",
    "adv_ce",
    "mi_estimate",
    "seed",
    "epochs",
)


class AdamConfig(BaseModel):
    """Adam optimizer hyperparameters."""

    model_config = ConfigDict(frozen=True)

    lr: float = Field(default=1e-3, gt=0, description="Learning rate")
    beta1: float = Field(default=0.9, ge=0, lt=1, description="First-moment decay")
    beta2: float = Field(default=0.999, ge=0, lt=1, description="Second-moment decay")
    eps: float = Field(default=1e-8, gt=0, description="Denominator stabilizer")


class ModelConfig(BaseModel):
    """Architecture and objective of one censored VAE."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    d_x: int = Field(default=784, ge=1, description="Data dimension")
    d_z: int = Field(default=20, ge=1, description="Latent dimension")
    d_s: int = Field(default=10, ge=2, description="Number of nuisance classes (one-hot width)")
    hidden: int = Field(default=500, ge=1, description="Hidden layer width")
    mode: ConditioningMode = Field(default=ConditioningMode.FULL, description="Conditioning")
    censor: CensorMode = Field(default=CensorMode.NONE, description="Censoring objective")
    lam: float = Field(default=0.0, ge=0, alias="lambda", description="Adversarial weight")
    gamma: float = Field(default=1.0, ge=1, description="KL weight")
    k: int = Field(default=1, ge=1, description="Latent samples per item")

    @model_validator(mode="after")
    def validate_censor_parameters(self) -> "ModelConfig":
        """Lambda belongs to adversarial censoring, gamma to KL censoring."""
        if self.lam != 0 and self.censor is not CensorMode.ADVERSARIAL:
            raise ValueError("lambda requires the adversarial censor")
        if self.gamma != 1 and self.censor is not CensorMode.KL:
            raise ValueError("gamma requires the kl censor")
        return self

    @property
    def encoder_input_dim(self) -> int:
        """Encoder input width (x, plus s when the encoder is conditioned)."""
        return self.d_x + (self.d_s if self.mode.encoder_conditioned else 0)

    @property
    def decoder_input_dim(self) -> int:
        """Decoder input width (z, plus s when the decoder is conditioned)."""
        return self.d_z + (self.d_s if self.mode.decoder_conditioned else 0)

    @property
    def censor_param(self) -> float:
        """The swept parameter of this configuration (lambda or gamma)."""
        if self.censor is CensorMode.KL:
            return self.gamma
        return self.lam

    @property
    def is_baseline(self) -> bool:
        """Whether the objective reduces to the plain ELBO."""
        return self.lam == 0 and self.gamma == 1

    def parameter_count(self, role: str) -> int:
        """Number of trainable scalars for 'encoder', 'decoder' or 'adversary'."""
        dims = {
            "encoder": (self.encoder_input_dim, 2 * self.d_z),
            "decoder": (self.decoder_input_dim, self.d_x),
            "adversary": (self.d_z, self.d_s),
        }
        if role not in dims:
            raise ValueError(f"Unknown network role: {role}")
        d_in, d_out = dims[role]
        return d_in * self.hidden + self.hidden + self.hidden * d_out + d_out


class TrainingConfig(BaseModel):
    """Complete description of a single training run."""

    model_config = ConfigDict(frozen=True)

    model: ModelConfig = Field(default_factory=ModelConfig)
    adam: AdamConfig = Field(default_factory=AdamConfig)
    epochs: int = Field(default=100, ge=1, description="Passes over the training set")
    batch_size: int = Field(default=100, ge=1, description="Images per batch")
    eval_batch_size: int = Field(default=1000, ge=1, description="Chunk size for evaluation")
    seed: int = Field(default=0, ge=0, lt=2**63, description="Root seed of the run")
    train_subset: int | None = Field(
        default=None, ge=1, description="Use only the first N training images"
    )


class StepReport(BaseModel):
    """Per-batch means of the objective terms."""

    elbo_term: float = Field(..., description="recon - gamma * kl")
    kl_term: float = Field(..., description="Unweighted KL to the prior")
    recon_term: float = Field(..., description="Bernoulli log-likelihood")
    adversary_ce: float = Field(
        default=math.nan, description="Adversary cross-entropy before its update"
    )


class MetricsRecord(BaseModel):
    """Evaluation metrics after one epoch."""

    epoch: int = Field(..., ge=0)
    elbo: float = Field(..., description="Mean test ELBO in nats per image")
    recon: float = Field(..., description="Mean test reconstruction term")
    kl: float = Field(..., description="Mean test KL term")
    adv_ce: float = Field(..., description="Adversary cross-entropy on the test set")
    adv_acc: float = Field(..., ge=0, le=1, description="Adversary accuracy on the test set")
    mi_estimate: float = Field(..., description="log(num classes) - adv_ce")
    train_elbo: float = Field(default=math.nan, description="Mean training objective")

    def csv_row(self) -> list[str]:
        """Values in METRICS_COLUMNS order, full precision."""
        return [str(self.epoch)] + [repr(getattr(self, c)) for c in METRICS_COLUMNS[1:]]


class RunManifest(BaseModel):
    """Description of one output directory, enough to reproduce it."""

    config: TrainingConfig
    version: str
    seed: int
    started_at: datetime
    finished_at: datetime | None = None
    finalized: bool = False
    outputs: dict[str, str] = Field(default_factory=dict)


class GridManifest(BaseModel):
    """Sidecar manifest of a generated image grid."""

    task: GridTask
    checkpoint: str | None = None
    seed: int = Field(..., ge=0)
    rows: int = Field(..., ge=1)
    cols: int = Field(..., ge=1)
    digit_classes: list[int] = Field(default_factory=list)
    mode: ConditioningMode | None = None


class SweepRow(BaseModel):
    """Final-epoch metrics of one sweep cell."""

    mode: ConditioningMode
    censor: CensorMode
    param: float
    elbo: float | None = None
    adv_acc: float | None = None
    adv_ce: float | None = None
    mi_estimate: float | None = None
    seed: int
    epochs: int
    error: str | None = None

    def csv_row(self) -> list[str]:
        """Values in SWEEP_COLUMNS order; failed runs carry ERROR markers."""
        metrics: list[Any] = [self.elbo, self.adv_acc, self.adv_ce, self.mi_estimate]
        if self.error is not None:
            cells = ["ERROR"] * len(metrics)
        else:
            cells = [repr(float(v)) for v in metrics]
        return [
            self.mode.value,
            self.censor.value,
            f"{self.param:g}",
            *cells,
            str(self.seed),
            str(self.epochs),
        ]


class LayerSpec(BaseModel):
    """Name and weight shape of one linear layer in a checkpoint."""

    name: str
    in_dim: int = Field(..., ge=1)
    out_dim: int = Field(..., ge=1)


class CheckpointManifest(BaseModel):
    """Header of a checkpoint file."""

    config: TrainingConfig
    mode: ConditioningMode
    censor: CensorMode
    seed: int
    epoch: int = Field(..., ge=0)
    encoder_head: str = "mu,logvar"
    layers: list[LayerSpec]

    @field_validator("encoder_head")
    @classmethod
    def validate_encoder_head(cls, v: str) -> str:
        """Only the mu-first head ordering exists."""
        if v != "mu,logvar":
            raise ValueError(f"Unsupported encoder head ordering: {v}")
        return v
