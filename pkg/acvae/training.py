"""Objectives and the alternating adversary/VAE training loop.

Three objectives share one code path:

- baseline ELBO: recon - KL
- KL censoring: recon - gamma * KL
- adversarial censoring: recon - KL + lambda * CE(adversary(z), s), where the
  adversary is frozen for the VAE update and z is the same sample the decoder sees

All objectives are maximized by descending on the negated batch mean.
"""

import logging
from collections.abc import Callable, Iterator
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .evaluation import evaluate
from .exceptions import NonFiniteError
from .mnist import Batch, Dataset, batches
from .models import MetricsRecord, StepReport, TrainingConfig
from .networks import (
    AdversaryNet,
    DecoderNet,
    EncoderNet,
    Networks,
    adversary_backward,
    adversary_logits,
    build_networks,
    decode,
    decoder_backward,
    encode,
    encoder_backward,
)
from .stochastic import (
    LatentSample,
    Rng,
    bernoulli_loglik,
    bernoulli_loglik_backward,
    kl_standard_normal,
    kl_standard_normal_backward,
    reparameterize,
    reparameterize_backward,
    softmax_cross_entropy,
)
from .types import CensorMode, ConditioningMode, LabelArray, RngStream

__all__ = [
    "sample_latent",
    "elbo_batch",
    "adversary_batch",
    "censored_vae_batch",
    "Trainer",
    "TrainingResult",
    "train",
]

logger = logging.getLogger(__name__)


def sample_latent(
    enc: EncoderNet,
    batch: Batch,
    mode: ConditioningMode,
    k: int,
    rng: Rng,
) -> LatentSample:
    """Encode a batch (caching the forward pass) and draw k latents per item."""
    post = encode(enc, batch.x, batch.s_onehot, mode)
    return reparameterize(post, rng, k=k)


def _vae_pass(
    enc: EncoderNet,
    dec: DecoderNet,
    batch: Batch,
    mode: ConditioningMode,
    latent: LatentSample,
    gamma: float,
    adv: AdversaryNet | None = None,
    lam: float = 0.0,
    batch_index: int | None = None,
) -> StepReport:
    b = len(batch)
    k = latent.k
    post = latent.posterior
    x_rep = np.tile(batch.x, (k, 1))
    s_rep = np.tile(batch.s_onehot, (k, 1))

    y = decode(dec, latent.z, s_rep, mode)
    recon = bernoulli_loglik(x_rep, y).reshape(k, b).mean(axis=0)
    kl = kl_standard_normal(post)
    elbo = recon - gamma * kl
    loss = -float(elbo.mean())

    adversary_ce = float("nan")
    ce_grad = None
    if adv is not None:
        logits = adversary_logits(adv, latent.z)
        ce, ce_grad = softmax_cross_entropy(logits, np.tile(batch.s, k))
        adversary_ce = float(ce.mean())
        loss -= lam * adversary_ce

    if not np.isfinite(loss):
        where = f"loss of batch {batch_index}" if batch_index is not None else "loss"
        logger.error(f"Aborting: non-finite {where}")
        raise NonFiniteError(where, f"recon={recon.mean()}, kl={kl.mean()}")

    grad_y = bernoulli_loglik_backward(x_rep, y) * (-1.0 / (k * b))
    grad_z, _ = decoder_backward(dec, grad_y, mode)
    if adv is not None and ce_grad is not None:
        if lam != 0:
            grad_z = grad_z + adversary_backward(adv, ce_grad * (-lam / (k * b)))
        adv.zero_grad()

    grad_mu, grad_logvar = reparameterize_backward(latent, grad_z)
    kl_mu, kl_logvar = kl_standard_normal_backward(post)
    grad_mu = grad_mu + kl_mu * (gamma / b)
    grad_logvar = grad_logvar + kl_logvar * (gamma / b)
    encoder_backward(enc, post, grad_mu, grad_logvar, mode)

    return StepReport(
        elbo_term=float(elbo.mean()),
        kl_term=float(kl.mean()),
        recon_term=float(recon.mean()),
        adversary_ce=adversary_ce,
    )


def elbo_batch(
    enc: EncoderNet,
    dec: DecoderNet,
    batch: Batch,
    mode: ConditioningMode,
    k: int,
    gamma: float,
    rng: Rng,
    *,
    latent: LatentSample | None = None,
    batch_index: int | None = None,
) -> StepReport:
    """Per-item -gamma * KL + mean_j log p(x | s, z_j); gradients accumulate into enc/dec.

    Args:
        enc: Encoder
        dec: Decoder
        batch: Training pairs
        mode: Conditioning mode
        k: Latent samples per item
        gamma: KL weight (1 gives the plain ELBO)
        rng: Noise stream used when no latent is given
        latent: Sample drawn by sample_latent with the current encoder
        batch_index: Reported if the loss turns non-finite

    Raises:
        NonFiniteError: If the objective is not finite
    """
    if latent is None:
        latent = sample_latent(enc, batch, mode, k, rng)
    return _vae_pass(enc, dec, batch, mode, latent, gamma, batch_index=batch_index)


def adversary_batch(adv: AdversaryNet, z_detached: np.ndarray, s: LabelArray) -> float:
    """Mean cross-entropy of the adversary on z; gradients reach the adversary only."""
    z = np.array(z_detached, dtype=np.float64, copy=True)
    ce, grad = softmax_cross_entropy(adversary_logits(adv, z), s)
    adversary_backward(adv, grad / z.shape[0])
    return float(ce.mean())


def censored_vae_batch(
    enc: EncoderNet,
    dec: DecoderNet,
    adv_frozen: AdversaryNet,
    batch: Batch,
    mode: ConditioningMode,
    k: int,
    lam: float,
    rng: Rng,
    *,
    latent: LatentSample | None = None,
    batch_index: int | None = None,
) -> StepReport:
    """ELBO plus lambda times the frozen adversary's cross-entropy on the same z.

    The adversary's own gradients are discarded. With lam == 0 the encoder and
    decoder gradients are bitwise those of elbo_batch with gamma = 1.
    """
    if latent is None:
        latent = sample_latent(enc, batch, mode, k, rng)
    return _vae_pass(
        enc, dec, batch, mode, latent, 1.0, adv=adv_frozen, lam=lam, batch_index=batch_index
    )


@dataclass
class TrainingResult:
    """Trained networks and the per-epoch metrics."""

    config: TrainingConfig
    networks: Networks
    history: list[MetricsRecord] = field(default_factory=list)
    epoch: int = 0


class Trainer:
    """Alternating adversary/VAE optimization for one configuration.

    Per batch: encode and sample z; one Adam step of the adversary on the
    detached z; one Adam step of the VAE on its objective with the adversary
    frozen. The adversary always trains, censoring or not; without adversarial
    censoring its gradients never reach the VAE.

    Example:
        >>> trainer = Trainer(TrainingConfig(epochs=1), train_set, test_set)
        >>> for record in trainer.run():
        ...     print(record.elbo, record.adv_acc)
    """

    def __init__(
        self,
        config: TrainingConfig,
        train_set: Dataset,
        test_set: Dataset | None = None,
    ) -> None:
        self.config = config
        self.train_set = (
            train_set.subset(config.train_subset) if config.train_subset else train_set
        )
        self.test_set = test_set
        self.rng = Rng(config.seed)
        self.networks = build_networks(config.model, self.rng)
        self._noise = self.rng.substream(RngStream.NOISE)
        self._shuffle = self.rng.substream(RngStream.SHUFFLE)
        self._eval = self.rng.substream(RngStream.EVAL)
        self.epoch = 0

    def train_batch(self, batch: Batch, batch_index: int | None = None) -> StepReport:
        """One alternating update.

        Returns the VAE step report; adversary_ce is the adversary's batch loss
        before its own update, whatever the censoring mode.
        """
        model = self.config.model
        nets = self.networks
        latent = sample_latent(nets.encoder, batch, model.mode, model.k, self._noise)

        adv_ce = adversary_batch(nets.adversary, latent.z, np.tile(batch.s, model.k))
        nets.adversary.adam_step(self.config.adam)

        if model.censor is CensorMode.ADVERSARIAL:
            report = censored_vae_batch(
                nets.encoder,
                nets.decoder,
                nets.adversary,
                batch,
                model.mode,
                model.k,
                model.lam,
                self._noise,
                latent=latent,
                batch_index=batch_index,
            )
        else:
            report = elbo_batch(
                nets.encoder,
                nets.decoder,
                batch,
                model.mode,
                model.k,
                model.gamma,
                self._noise,
                latent=latent,
                batch_index=batch_index,
            )
        nets.vae_step(self.config.adam)
        return report.model_copy(update={"adversary_ce": adv_ce})

    def train_epoch(self) -> float:
        """One pass over the training set; returns the mean objective per image."""
        total = 0.0
        count = 0
        for index, batch in enumerate(
            batches(self.train_set, self.config.batch_size, self._shuffle)
        ):
            report = self.train_batch(batch, batch_index=index)
            total += report.elbo_term * len(batch)
            count += len(batch)
            logger.debug(
                f"epoch {self.epoch + 1} batch {index}: elbo={report.elbo_term:.3f} "
                f"kl={report.kl_term:.3f} adv_ce={report.adversary_ce:.4f}"
            )
        self.epoch += 1
        return total / max(count, 1)

    def run(self) -> Iterator[MetricsRecord]:
        """Train for the configured epochs, yielding metrics after each one."""
        eval_set = self.test_set if self.test_set is not None else self.train_set
        while self.epoch < self.config.epochs:
            train_elbo = self.train_epoch()
            record = evaluate(
                self.networks,
                eval_set,
                self.config.model,
                self._eval.substream(self.epoch),
                epoch=self.epoch,
                chunk_size=self.config.eval_batch_size,
            ).model_copy(update={"train_elbo": train_elbo})
            logger.info(
                f"epoch {record.epoch}/{self.config.epochs}: train_elbo={train_elbo:.3f} "
                f"elbo={record.elbo:.3f} adv_acc={record.adv_acc:.4f} mi={record.mi_estimate:.4f}"
            )
            yield record


def train(
    config: TrainingConfig,
    train_set: Dataset,
    test_set: Dataset | None = None,
    *,
    checkpoint_path: Path | None = None,
    on_epoch: Callable[[MetricsRecord], None] | None = None,
) -> TrainingResult:
    """Run a full training job.

    Args:
        config: Run configuration (mode and censor live in config.model)
        train_set: Training data
        test_set: Evaluation data (the training data when omitted)
        checkpoint_path: Where to write the checkpoint on completion
        on_epoch: Called with each epoch's metrics as soon as they exist

    Returns:
        TrainingResult with the trained networks and metrics history

    Raises:
        NonFiniteError: If training diverges
    """
    trainer = Trainer(config, train_set, test_set)
    result = TrainingResult(config=config, networks=trainer.networks)
    for record in trainer.run():
        result.history.append(record)
        if on_epoch is not None:
            on_epoch(record)
    result.epoch = trainer.epoch
    if checkpoint_path is not None:
        save_checkpoint(checkpoint_path, result.networks, config, epoch=trainer.epoch)
    return result
