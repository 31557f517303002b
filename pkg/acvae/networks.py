"""Encoder, decoder and adversary networks of the censored VAE.

All three are two-layer tanh perceptrons. The conditioning mode decides whether
the one-hot nuisance variable s is concatenated to the encoder input (FULL),
the decoder input (FULL, PARTIAL), or neither (BASIC).
"""

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ShapeMismatchError
from .models import AdamConfig, ModelConfig
from .numerics import Mlp, Sigmoid
from .stochastic import GaussianPosterior, Rng
from .types import ConditioningMode, RngStream, Tensor

__all__ = [
    "EncoderNet",
    "DecoderNet",
    "AdversaryNet",
    "Networks",
    "build_networks",
    "encode",
    "encoder_backward",
    "decode",
    "decoder_backward",
    "adversary_logits",
    "adversary_backward",
]

logger = logging.getLogger(__name__)


class EncoderNet(Mlp):
    """q(z | x[, s]): outputs mu and logvar concatenated, mu first."""

    def __init__(self, config: ModelConfig, rng: Rng | None = None) -> None:
        super().__init__(
            config.encoder_input_dim,
            config.hidden,
            2 * config.d_z,
            rng.generator if rng is not None else None,
            name="encoder",
        )
        self.d_z = config.d_z
        self.d_s = config.d_s


class DecoderNet(Mlp):
    """p(x | z[, s]): sigmoid outputs in (0, 1)."""

    def __init__(self, config: ModelConfig, rng: Rng | None = None) -> None:
        super().__init__(
            config.decoder_input_dim,
            config.hidden,
            config.d_x,
            rng.generator if rng is not None else None,
            name="decoder",
            output_activation=Sigmoid(),
        )
        self.d_s = config.d_s


class AdversaryNet(Mlp):
    """q(s | z): raw logits over the nuisance classes."""

    def __init__(self, config: ModelConfig, rng: Rng | None = None) -> None:
        super().__init__(
            config.d_z,
            config.hidden,
            config.d_s,
            rng.generator if rng is not None else None,
            name="adversary",
        )


@dataclass
class Networks:
    """The three networks of one run."""

    encoder: EncoderNet
    decoder: DecoderNet
    adversary: AdversaryNet

    def all(self) -> list[Mlp]:
        """Networks in checkpoint order."""
        return [self.encoder, self.decoder, self.adversary]

    def vae_step(self, adam: AdamConfig) -> None:
        self.encoder.adam_step(adam)
        self.decoder.adam_step(adam)


def build_networks(config: ModelConfig, rng: Rng | None) -> Networks:
    """Build and size-check the networks for a configuration.

    Args:
        config: Architecture description
        rng: Root stream; each network draws from its own init substream.
            None builds zero-weight networks.

    Raises:
        ConfigurationError: If a network's size disagrees with the config
    """

    def init(stream: RngStream) -> Rng | None:
        return rng.substream(stream) if rng is not None else None

    nets = Networks(
        encoder=EncoderNet(config, init(RngStream.INIT_ENCODER)),
        decoder=DecoderNet(config, init(RngStream.INIT_DECODER)),
        adversary=AdversaryNet(config, init(RngStream.INIT_ADVERSARY)),
    )
    for role, net in zip(("encoder", "decoder", "adversary"), nets.all()):
        expected = config.parameter_count(role)
        if net.parameter_count != expected:
            raise ConfigurationError(
                f"{role} has {net.parameter_count} parameters, expected {expected}"
            )
    logger.debug(
        f"Built networks for mode={config.mode.value}: "
        + ", ".join(f"{n.name}={n.parameter_count}" for n in nets.all())
    )
    return nets


def _with_condition(inputs: Tensor, s_onehot: Tensor, conditioned: bool) -> Tensor:
    if not conditioned:
        return inputs
    if s_onehot.shape[0] != inputs.shape[0]:
        raise ShapeMismatchError(inputs.shape, s_onehot.shape, op="concatenate")
    return np.concatenate([inputs, s_onehot], axis=1)


def encode(
    enc: EncoderNet,
    x: Tensor,
    s_onehot: Tensor,
    mode: ConditioningMode,
    *,
    cache: bool = True,
) -> GaussianPosterior:
    """Posterior parameters for a batch; s is appended only in FULL mode."""
    out = enc.forward(_with_condition(x, s_onehot, mode.encoder_conditioned), cache=cache)
    return GaussianPosterior(mu=out[:, : enc.d_z], logvar=out[:, enc.d_z :])


def encoder_backward(
    enc: EncoderNet,
    post: GaussianPosterior,
    grad_mu: Tensor,
    grad_logvar: Tensor,
    mode: ConditioningMode,
) -> tuple[Tensor, Tensor]:
    """Backpropagate posterior gradients; returns gradients w.r.t. (x, s_onehot).

    The s gradient is all zeros when the encoder is not conditioned.
    """
    grad_out = np.concatenate([grad_mu, grad_logvar * post.clamp_mask], axis=1)
    grad_in = enc.backward(grad_out)
    return _split_condition_grad(grad_in, enc.d_s, mode.encoder_conditioned)


def _split_condition_grad(grad_in: Tensor, d_s: int, conditioned: bool) -> tuple[Tensor, Tensor]:
    if not conditioned:
        return grad_in, np.zeros((grad_in.shape[0], d_s))
    return grad_in[:, :-d_s], grad_in[:, -d_s:]


def decode(
    dec: DecoderNet,
    z: Tensor,
    s_onehot: Tensor,
    mode: ConditioningMode,
    *,
    cache: bool = True,
) -> Tensor:
    """Bernoulli means y in (0, 1); s is appended in FULL and PARTIAL modes."""
    return dec.forward(_with_condition(z, s_onehot, mode.decoder_conditioned), cache=cache)


def decoder_backward(
    dec: DecoderNet,
    grad_y: Tensor,
    mode: ConditioningMode,
) -> tuple[Tensor, Tensor]:
    """Backpropagate from the decoder output; returns gradients w.r.t. (z, s_onehot)."""
    grad_in = dec.backward(grad_y)
    return _split_condition_grad(grad_in, dec.d_s, mode.decoder_conditioned)


def adversary_logits(adv: AdversaryNet, z: Tensor, *, cache: bool = True) -> Tensor:
    """Unnormalized class scores; softmax is applied by the consumers."""
    return adv.forward(z, cache=cache)


def adversary_backward(adv: AdversaryNet, grad_logits: Tensor) -> Tensor:
    """Backpropagate logit gradients; returns the gradient w.r.t. z."""
    return adv.backward(grad_logits)
