"""Probabilistic building blocks: seeded RNG, Gaussian posteriors, likelihoods."""

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import LabelOutOfRangeError, ShapeMismatchError
from .types import LabelArray, RngStream, Tensor, Vector

__all__ = [
    "LOGVAR_MIN",
    "LOGVAR_MAX",
    "PROB_CLAMP",
    "Rng",
    "GaussianPosterior",
    "LatentSample",
    "reparameterize",
    "reparameterize_backward",
    "kl_standard_normal",
    "kl_standard_normal_backward",
    "bernoulli_loglik",
    "bernoulli_loglik_backward",
    "softmax",
    "softmax_cross_entropy",
    "mi_estimate",
]

LOGVAR_MIN = -15.0
LOGVAR_MAX = 15.0
PROB_CLAMP = 1e-7


class Rng:
    """Deterministic, splittable random stream.

    Each instance owns a counter-based Philox generator keyed by the root seed
    and the path of substream ids that led to it, so sibling streams never
    perturb one another.

    Example:
        >>> rng = Rng(7)
        >>> noise = rng.substream(RngStream.NOISE)
        >>> eps = noise.normal((100, 20))
    """

    def __init__(self, seed: int, path: tuple[int, ...] = ()) -> None:
        self.seed = seed
        self.path = path
        sequence = np.random.SeedSequence(seed, spawn_key=path)
        self.generator = np.random.Generator(np.random.Philox(sequence))

    def substream(self, stream: RngStream | int) -> "Rng":
        """Independent child stream identified by its id."""
        return Rng(self.seed, self.path + (int(stream),))

    def normal(self, shape: tuple[int, ...]) -> Tensor:
        return self.generator.standard_normal(shape)

    def permutation(self, n: int) -> LabelArray:
        """Uniform random permutation of range(n) (Fisher-Yates)."""
        return self.generator.permutation(n).astype(np.int64)


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian q(z | x, s) per batch item.

    logvar is clamped to [LOGVAR_MIN, LOGVAR_MAX] on construction; clamp_mask
    records which entries were left untouched (gradients flow only there).
    """

    mu: Tensor
    logvar: Tensor
    clamp_mask: Tensor = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.mu.shape != self.logvar.shape or self.mu.ndim != 2:
            raise ShapeMismatchError(self.mu.shape, self.logvar.shape, op="GaussianPosterior")
        raw = self.logvar
        self.logvar = np.clip(raw, LOGVAR_MIN, LOGVAR_MAX)
        self.clamp_mask = ((raw >= LOGVAR_MIN) & (raw <= LOGVAR_MAX)).astype(np.float64)

    @property
    def batch_size(self) -> int:
        return int(self.mu.shape[0])

    @property
    def std(self) -> Tensor:
        return np.exp(0.5 * self.logvar)


@dataclass
class LatentSample:
    """k reparameterized draws per item, stacked sample-major.

    Row j * batch_size + i holds sample j of item i.
    """

    z: Tensor
    eps: Tensor
    posterior: GaussianPosterior
    k: int = 1


def reparameterize(
    post: GaussianPosterior,
    rng: Rng,
    k: int = 1,
    eps: Tensor | None = None,
) -> LatentSample:
    """Draw z = mu + sigma * eps with eps ~ N(0, I).

    Args:
        post: Posterior to sample from
        rng: Noise stream (unused when eps is given)
        k: Samples per item
        eps: Optional fixed noise of shape (k * batch, d_z)
    """
    b, d = post.mu.shape
    if eps is None:
        eps = rng.normal((k * b, d))
    elif eps.shape != (k * b, d):
        raise ShapeMismatchError(eps.shape, (k * b, d), op="reparameterize")
    z = np.tile(post.mu, (k, 1)) + np.tile(post.std, (k, 1)) * eps
    return LatentSample(z=z, eps=eps, posterior=post, k=k)


def reparameterize_backward(sample: LatentSample, grad_z: Tensor) -> tuple[Tensor, Tensor]:
    """Gradients w.r.t. (mu, clamped logvar); eps receives none."""
    post = sample.posterior
    b, d = post.mu.shape
    grads = grad_z.reshape(sample.k, b, d)
    half_sigma_eps = 0.5 * np.tile(post.std, (sample.k, 1)) * sample.eps
    grad_mu = grads.sum(axis=0)
    grad_logvar = (grad_z * half_sigma_eps).reshape(sample.k, b, d).sum(axis=0)
    return grad_mu, grad_logvar


def kl_standard_normal(post: GaussianPosterior) -> Vector:
    """KL(q || N(0, I)) per item: 0.5 * sum(mu^2 + sigma^2 - logvar - 1)."""
    terms = post.mu * post.mu + np.exp(post.logvar) - post.logvar - 1.0
    return np.asarray(0.5 * terms.sum(axis=1))


def kl_standard_normal_backward(post: GaussianPosterior) -> tuple[Tensor, Tensor]:
    """Per-item gradients of the KL w.r.t. (mu, clamped logvar)."""
    return post.mu.copy(), 0.5 * (np.exp(post.logvar) - 1.0)


def bernoulli_loglik(x: Tensor, y: Tensor) -> Vector:
    """sum_i x_i log y_i + (1 - x_i) log(1 - y_i) per item, y clamped to (1e-7, 1 - 1e-7)."""
    if x.shape != y.shape:
        raise ShapeMismatchError(x.shape, y.shape, op="bernoulli_loglik")
    yc = np.clip(y, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return np.asarray((x * np.log(yc) + (1.0 - x) * np.log1p(-yc)).sum(axis=1))


def bernoulli_loglik_backward(x: Tensor, y: Tensor) -> Tensor:
    """Gradient of bernoulli_loglik w.r.t. y (zero where the clamp is active)."""
    inside = (y >= PROB_CLAMP) & (y <= 1.0 - PROB_CLAMP)
    yc = np.clip(y, PROB_CLAMP, 1.0 - PROB_CLAMP)
    return np.where(inside, x / yc - (1.0 - x) / (1.0 - yc), 0.0)


def softmax(logits: Tensor) -> Tensor:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return np.asarray(exp / exp.sum(axis=1, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels: LabelArray) -> tuple[Vector, Tensor]:
    """Per-item -log softmax(logits)[label] and its gradient w.r.t. the logits.

    Raises:
        LabelOutOfRangeError: If a label is not a valid class index
    """
    n, num_classes = logits.shape
    if labels.shape != (n,):
        raise ShapeMismatchError(logits.shape, labels.shape, op="softmax_cross_entropy")
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        raise LabelOutOfRangeError(int(labels[bad[0]]), int(bad[0]))

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    loss = log_norm - shifted[rows, labels]
    grad = np.exp(shifted - log_norm[:, None])
    grad[rows, labels] -= 1.0
    return loss, grad


def mi_estimate(mean_cross_entropy: float, num_classes: int) -> float:
    """Variational lower-bound estimate of I(s; z) in nats (not clamped at zero)."""
    return math.log(num_classes) - mean_cross_entropy
