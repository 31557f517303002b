"""Type definitions and enumerations for acvae."""

from enum import Enum, IntEnum
from typing import TypeAlias

import numpy as np
import numpy.typing as npt

__all__ = [
    "ConditioningMode",
    "CensorMode",
    "GridTask",
    "RngStream",
    "Tensor",
    "Vector",
    "LabelArray",
    "PixelArray",
]


class ConditioningMode(str, Enum):
    """Where the one-hot nuisance variable is injected."""

    FULL = "full"
    PARTIAL = "partial"
    BASIC = "basic"

    @property
    def encoder_conditioned(self) -> bool:
        """Whether the encoder input includes s."""
        return self is ConditioningMode.FULL

    @property
    def decoder_conditioned(self) -> bool:
        """Whether the decoder input includes s."""
        return self is not ConditioningMode.BASIC


class CensorMode(str, Enum):
    """Invariance-enforcing modification of the VAE objective."""

    NONE = "none"
    ADVERSARIAL = "adv"
    KL = "kl"


class GridTask(str, Enum):
    """Image grid generation tasks."""

    TRANSFER = "transfer"
    SAMPLE = "sample"
    EXAMPLES = "examples"


class RngStream(IntEnum):
    """Named random substreams.

    Values are part of the seeding contract: changing them changes every run.
    """

    INIT_ENCODER = 0
    INIT_DECODER = 1
    INIT_ADVERSARY = 2
    NOISE = 3
    SHUFFLE = 4
    EVAL = 5
    SAMPLE = 6


# Type aliases
Tensor: TypeAlias = npt.NDArray[np.float64]
Vector: TypeAlias = npt.NDArray[np.float64]
LabelArray: TypeAlias = npt.NDArray[np.int64]
PixelArray: TypeAlias = npt.NDArray[np.uint8]
