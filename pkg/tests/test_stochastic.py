"""Tests for the RNG, posteriors and likelihood terms."""

import math

import numpy as np
import pytest

from acvae.exceptions import LabelOutOfRangeError, ShapeMismatchError
from acvae.stochastic import (
    LOGVAR_MAX,
    GaussianPosterior,
    Rng,
    bernoulli_loglik,
    bernoulli_loglik_backward,
    kl_standard_normal,
    kl_standard_normal_backward,
    mi_estimate,
    reparameterize,
    reparameterize_backward,
    softmax_cross_entropy,
)
from acvae.types import RngStream


class TestRng:
    """Test the splittable random stream."""

    def test_same_seed_same_draws(self):
        """Test streams are reproducible."""
        np.testing.assert_array_equal(Rng(7).normal((3, 2)), Rng(7).normal((3, 2)))

    def test_substreams_differ(self):
        """Test sibling substreams produce different values."""
        root = Rng(7)
        a = root.substream(RngStream.NOISE).normal((4,))
        b = root.substream(RngStream.SHUFFLE).normal((4,))
        assert not np.array_equal(a, b)

    def test_siblings_do_not_interfere(self):
        """Test drawing from one substream leaves another unchanged."""
        untouched = Rng(7).substream(RngStream.EVAL).normal((5,))
        root = Rng(7)
        root.substream(RngStream.NOISE).normal((1000,))
        np.testing.assert_array_equal(root.substream(RngStream.EVAL).normal((5,)), untouched)

    def test_permutation(self):
        """Test permutations cover every index once."""
        perm = Rng(0).permutation(50)
        assert perm.dtype == np.int64
        np.testing.assert_array_equal(np.sort(perm), np.arange(50))


class TestPosterior:
    """Test Gaussian posteriors and reparameterization."""

    def test_logvar_clamp(self):
        """Test extreme log-variances are clamped and masked."""
        post = GaussianPosterior(mu=np.zeros((1, 2)), logvar=np.array([[20.0, 1.0]]))
        assert post.logvar[0, 0] == LOGVAR_MAX
        np.testing.assert_array_equal(post.clamp_mask, [[0.0, 1.0]])

    def test_shape_mismatch(self):
        """Test mu and logvar must agree in shape."""
        with pytest.raises(ShapeMismatchError):
            GaussianPosterior(mu=np.zeros((2, 3)), logvar=np.zeros((2, 2)))

    def test_k_samples_are_sample_major(self):
        """Test row j * b + i is sample j of item i."""
        gen = np.random.default_rng(0)
        post = GaussianPosterior(mu=gen.normal(size=(3, 2)), logvar=gen.normal(size=(3, 2)))
        sample = reparameterize(post, Rng(1), k=2)
        assert sample.z.shape == (6, 2)
        for j in range(2):
            for i in range(3):
                expected = post.mu[i] + post.std[i] * sample.eps[j * 3 + i]
                np.testing.assert_allclose(sample.z[j * 3 + i], expected)

    def test_fixed_noise_shape(self):
        """Test fixed noise must have k * b rows."""
        post = GaussianPosterior(mu=np.zeros((3, 2)), logvar=np.zeros((3, 2)))
        with pytest.raises(ShapeMismatchError):
            reparameterize(post, Rng(0), k=2, eps=np.zeros((3, 2)))

    def test_sample_moments(self):
        """Test 10^5 draws match mu and sigma^2 within three standard errors."""
        n = 100_000
        post = GaussianPosterior(mu=np.array([[0.7, -1.2]]), logvar=np.array([[0.4, -0.8]]))
        z = reparameterize(post, Rng(21), k=n).z
        var = np.exp(post.logvar[0])
        assert (np.abs(z.mean(axis=0) - post.mu[0]) < 3 * np.sqrt(var / n)).all()
        assert (np.abs(z.var(axis=0) - var) < 3 * var * np.sqrt(2.0 / n)).all()

    def test_reparameterize_backward(self):
        """Test gradients through z = mu + exp(logvar / 2) * eps by finite differences."""
        gen = np.random.default_rng(3)
        mu = gen.normal(size=(2, 3))
        logvar = gen.normal(size=(2, 3))
        eps = gen.normal(size=(4, 3))
        weights = gen.normal(size=(4, 3))

        def value(m, lv):
            z = reparameterize(GaussianPosterior(m, lv), Rng(0), k=2, eps=eps).z
            return float((z * weights).sum())

        sample = reparameterize(GaussianPosterior(mu, logvar), Rng(0), k=2, eps=eps)
        grad_mu, grad_logvar = reparameterize_backward(sample, weights)
        h = 1e-6
        bump = np.zeros_like(mu)
        bump[1, 2] = h
        numeric_mu = (value(mu + bump, logvar) - value(mu - bump, logvar)) / (2 * h)
        numeric_lv = (value(mu, logvar + bump) - value(mu, logvar - bump)) / (2 * h)
        assert grad_mu[1, 2] == pytest.approx(numeric_mu, rel=1e-6)
        assert grad_logvar[1, 2] == pytest.approx(numeric_lv, rel=1e-6)


class TestKl:
    """Test the KL divergence to the standard normal prior."""

    def test_zero_at_prior(self):
        """Test KL vanishes for mu = 0 and logvar = 0."""
        post = GaussianPosterior(mu=np.zeros((2, 4)), logvar=np.zeros((2, 4)))
        np.testing.assert_allclose(kl_standard_normal(post), 0.0, atol=1e-12)

    def test_non_negative(self):
        """Test KL is non-negative on random posteriors."""
        gen = np.random.default_rng(0)
        post = GaussianPosterior(mu=gen.normal(size=(50, 5)), logvar=3 * gen.normal(size=(50, 5)))
        assert (kl_standard_normal(post) >= 0).all()

    def test_known_value(self):
        """Test a closed-form instance."""
        post = GaussianPosterior(mu=np.array([[1.0]]), logvar=np.array([[0.0]]))
        assert kl_standard_normal(post)[0] == pytest.approx(0.5)

    def test_matches_monte_carlo(self):
        """Test the closed form against sampled E[log q - log p] on 20 posteriors."""
        gen = np.random.default_rng(5)
        rng = Rng(6)
        for _ in range(20):
            post = GaussianPosterior(
                mu=gen.uniform(1.0, 2.0, size=(1, 5)) * gen.choice([-1.0, 1.0], size=(1, 5)),
                logvar=gen.uniform(-1.0, 1.0, size=(1, 5)),
            )
            sample = reparameterize(post, rng, k=1_000_000)
            log_ratio = 0.5 * (sample.z**2 - sample.eps**2 - post.logvar).sum(axis=1)
            assert log_ratio.mean() == pytest.approx(kl_standard_normal(post)[0], rel=0.01)

    def test_backward(self):
        """Test the analytic gradient formulas."""
        post = GaussianPosterior(mu=np.array([[0.3]]), logvar=np.array([[0.7]]))
        grad_mu, grad_logvar = kl_standard_normal_backward(post)
        assert grad_mu[0, 0] == pytest.approx(0.3)
        assert grad_logvar[0, 0] == pytest.approx(0.5 * (math.exp(0.7) - 1.0))


class TestBernoulli:
    """Test the Bernoulli log-likelihood."""

    def test_matches_naive_sum(self):
        """Test against an explicit summation."""
        gen = np.random.default_rng(0)
        x = gen.uniform(size=(3, 10))
        y = gen.uniform(0.01, 0.99, size=(3, 10))
        expected = [
            sum(x[i, j] * math.log(y[i, j]) + (1 - x[i, j]) * math.log(1 - y[i, j])
                for j in range(10))
            for i in range(3)
        ]
        np.testing.assert_allclose(bernoulli_loglik(x, y), expected, rtol=0, atol=1e-10)

    def test_clamped_perfect_match(self):
        """Test x = 0, y = 0 gives the clamp-limited value instead of -inf."""
        value = bernoulli_loglik(np.zeros((1, 784)), np.zeros((1, 784)))[0]
        assert value == pytest.approx(784 * math.log1p(-1e-7), rel=1e-9)
        assert value == pytest.approx(-7.84e-5, rel=1e-3)

    def test_non_positive(self):
        """Test the log-likelihood of binary targets never exceeds zero."""
        gen = np.random.default_rng(1)
        x = (gen.uniform(size=(4, 8)) > 0.5).astype(np.float64)
        assert (bernoulli_loglik(x, gen.uniform(size=(4, 8))) <= 0).all()

    def test_maximized_at_target(self):
        """Test the log-likelihood over a grid of y peaks at y = x."""
        y = np.arange(1, 100)[:, None] / 100
        for x in np.arange(1, 10) / 10:
            values = bernoulli_loglik(np.full_like(y, x), y)
            assert y[np.argmax(values), 0] == pytest.approx(x)

    def test_backward_zero_where_clamped(self):
        """Test no gradient flows through the clamp."""
        grad = bernoulli_loglik_backward(np.array([[1.0, 1.0]]), np.array([[0.0, 0.5]]))
        assert grad[0, 0] == 0.0
        assert grad[0, 1] == pytest.approx(2.0)


class TestSoftmaxCrossEntropy:
    """Test softmax cross-entropy."""

    def test_shift_invariant(self):
        """Test adding a constant to every logit leaves the loss unchanged."""
        gen = np.random.default_rng(0)
        logits = gen.normal(size=(4, 10))
        labels = np.array([0, 3, 9, 5])
        base, _ = softmax_cross_entropy(logits, labels)
        shifted, _ = softmax_cross_entropy(logits + 123.0, labels)
        np.testing.assert_allclose(base, shifted, rtol=0, atol=1e-10)

    def test_uniform_logits(self):
        """Test equal logits give log(num_classes)."""
        loss, _ = softmax_cross_entropy(np.zeros((1, 10)), np.array([4]))
        assert loss[0] == pytest.approx(math.log(10))

    def test_gradient(self):
        """Test the logit gradient against central differences."""
        gen = np.random.default_rng(2)
        logits = gen.normal(size=(3, 5))
        labels = np.array([1, 4, 0])
        _, grad = softmax_cross_entropy(logits, labels)
        h = 1e-5
        for i, j in [(0, 1), (1, 2), (2, 4)]:
            bump = np.zeros_like(logits)
            bump[i, j] = h
            plus, _ = softmax_cross_entropy(logits + bump, labels)
            minus, _ = softmax_cross_entropy(logits - bump, labels)
            numeric = (plus.sum() - minus.sum()) / (2 * h)
            assert abs(grad[i, j] - numeric) / max(abs(grad[i, j]) + abs(numeric), 1e-8) <= 1e-6

    def test_label_out_of_range(self):
        """Test labels must index a class."""
        with pytest.raises(LabelOutOfRangeError) as exc_info:
            softmax_cross_entropy(np.zeros((2, 3)), np.array([0, 3]))
        assert exc_info.value.value == 3
        assert exc_info.value.index == 1


class TestMiEstimate:
    """Test the mutual-information estimate."""

    def test_identity(self):
        """Test MI = log(classes) - CE."""
        assert mi_estimate(1.5, 10) == math.log(10) - 1.5

    def test_chance_level(self):
        """Test a chance-level adversary estimates zero information."""
        assert mi_estimate(math.log(10), 10) == pytest.approx(0.0, abs=1e-12)
