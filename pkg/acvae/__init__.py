"""Censored conditional variational autoencoders in plain numpy.

Trains VAEs whose latent code is encouraged to be invariant to a nuisance class
label, either through an adversary that tries to recover the label from the
code or through a heavier KL penalty, and renders style-transfer and sampling
grids from the trained models.

Example:
    Training and evaluating one configuration:
        >>> from acvae import ModelConfig, TrainingConfig, load_mnist, train
        >>>
        >>> train_set, test_set = load_mnist("data/mnist")
        >>> config = TrainingConfig(
        ...     model=ModelConfig(mode="full", censor="adv", lam=20.0),
        ...     epochs=10,
        ... )
        >>> result = train(config, train_set, test_set)
        >>> final = result.history[-1]
        >>> print(final.elbo, final.adv_acc, final.mi_estimate)

    Rendering a sampling grid from a checkpoint:
        >>> from acvae import Rng, load_checkpoint, sampling_grid, write_pgm
        >>>
        >>> networks, manifest = load_checkpoint("runs/full-adv-20/checkpoint.acvae")
        >>> grid = sampling_grid(networks.decoder, manifest.mode, Rng(0))
        >>> write_pgm(grid, "sample.pgm")
"""

__version__ = "0.1.0"

from ._http import AsyncMnistDownloader, MnistDownloader
from ._settings import AcvaeSettings
from .checkpoint import load_checkpoint, save_checkpoint
from .evaluation import (
    ImageGrid,
    eval_adversary,
    eval_elbo,
    evaluate,
    example_grid,
    read_metrics_csv,
    read_pgm,
    sampling_grid,
    style_transfer_grid,
    write_pgm,
)
from .exceptions import (
    AcvaeError,
    ArtifactIOError,
    BadMagicError,
    CheckpointError,
    CheckpointVersionError,
    ConfigurationError,
    DataError,
    DataFileNotFoundError,
    DownloadError,
    LabelOutOfRangeError,
    NoCachedForwardError,
    NonFiniteError,
    NumericError,
    ShapeMismatchError,
    TrailingBytesError,
    TruncatedFileError,
    UnsupportedModeError,
)
from .mnist import Batch, Dataset, load_mnist, load_split, parse_idx_images, parse_idx_labels
from .models import (
    AdamConfig,
    MetricsRecord,
    ModelConfig,
    RunManifest,
    StepReport,
    SweepRow,
    TrainingConfig,
)
from .networks import AdversaryNet, DecoderNet, EncoderNet, Networks, build_networks
from .numerics import LinearLayer, Mlp, adam_step, gradient_check
from .stochastic import Rng
from .sweep import default_grid, read_sweep_csv, tradeoff_sweep, write_sweep_csv
from .training import (
    Trainer,
    TrainingResult,
    adversary_batch,
    censored_vae_batch,
    elbo_batch,
    train,
)
from .types import CensorMode, ConditioningMode, GridTask, RngStream

__all__ = [
    # Version
    "__version__",
    # Settings
    "AcvaeSettings",
    # Data
    "Dataset",
    "Batch",
    "load_mnist",
    "load_split",
    "parse_idx_images",
    "parse_idx_labels",
    "MnistDownloader",
    "AsyncMnistDownloader",
    # Numerics
    "Rng",
    "LinearLayer",
    "Mlp",
    "adam_step",
    "gradient_check",
    # Networks
    "EncoderNet",
    "DecoderNet",
    "AdversaryNet",
    "Networks",
    "build_networks",
    # Training
    "elbo_batch",
    "adversary_batch",
    "censored_vae_batch",
    "Trainer",
    "TrainingResult",
    "train",
    "tradeoff_sweep",
    "default_grid",
    "write_sweep_csv",
    "read_sweep_csv",
    "save_checkpoint",
    "load_checkpoint",
    # Evaluation
    "eval_elbo",
    "eval_adversary",
    "evaluate",
    "ImageGrid",
    "style_transfer_grid",
    "sampling_grid",
    "example_grid",
    "write_pgm",
    "read_pgm",
    "read_metrics_csv",
    # Models
    "AdamConfig",
    "ModelConfig",
    "TrainingConfig",
    "StepReport",
    "MetricsRecord",
    "RunManifest",
    "SweepRow",
    # Types
    "ConditioningMode",
    "CensorMode",
    "GridTask",
    "RngStream",
    # Exceptions
    "AcvaeError",
    "ConfigurationError",
    "UnsupportedModeError",
    "DataError",
    "DataFileNotFoundError",
    "BadMagicError",
    "TruncatedFileError",
    "TrailingBytesError",
    "LabelOutOfRangeError",
    "ArtifactIOError",
    "DownloadError",
    "NumericError",
    "ShapeMismatchError",
    "NoCachedForwardError",
    "NonFiniteError",
    "CheckpointError",
    "CheckpointVersionError",
]
