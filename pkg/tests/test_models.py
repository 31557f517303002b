"""Tests for configuration models and settings."""

from pathlib import Path

import pytest
from pydantic import ValidationError

from acvae._settings import AcvaeSettings
from acvae.models import SWEEP_COLUMNS, AdamConfig, ModelConfig, SweepRow, TrainingConfig
from acvae.types import CensorMode, ConditioningMode


class TestModelConfig:
    """Test model configuration invariants."""

    def test_defaults(self):
        """Test the default architecture."""
        config = ModelConfig()
        assert (config.d_x, config.d_z, config.d_s, config.hidden) == (784, 20, 10, 500)
        assert config.mode is ConditioningMode.FULL
        assert config.censor is CensorMode.NONE
        assert config.is_baseline

    def test_lambda_alias(self):
        """Test lambda can be given by its alias."""
        config = ModelConfig.model_validate({"censor": "adv", "lambda": 20})
        assert config.lam == 20.0
        assert config.censor_param == 20.0

    def test_lambda_requires_adversary(self):
        """Test lambda without the adversarial censor is rejected."""
        with pytest.raises(ValidationError, match="lambda requires"):
            ModelConfig(censor=CensorMode.KL, lam=1.0)

    def test_gamma_requires_kl(self):
        """Test gamma without the KL censor is rejected."""
        with pytest.raises(ValidationError, match="gamma requires"):
            ModelConfig(censor=CensorMode.ADVERSARIAL, gamma=2.0)

    def test_ranges(self):
        """Test negative lambda, gamma below one and k = 0 are rejected."""
        with pytest.raises(ValidationError):
            ModelConfig(censor=CensorMode.ADVERSARIAL, lam=-1.0)
        with pytest.raises(ValidationError):
            ModelConfig(censor=CensorMode.KL, gamma=0.5)
        with pytest.raises(ValidationError):
            ModelConfig(k=0)

    def test_input_dims(self):
        """Test where s widens the inputs."""
        full = ModelConfig(mode=ConditioningMode.FULL)
        basic = ModelConfig(mode=ConditioningMode.BASIC)
        assert (full.encoder_input_dim, full.decoder_input_dim) == (794, 30)
        assert (basic.encoder_input_dim, basic.decoder_input_dim) == (784, 20)

    def test_unknown_role(self):
        """Test parameter counts exist only for the three networks."""
        with pytest.raises(ValueError):
            ModelConfig().parameter_count("critic")


class TestTrainingConfig:
    """Test run configuration."""

    def test_defaults(self):
        """Test the default schedule and optimizer."""
        config = TrainingConfig()
        assert (config.epochs, config.batch_size, config.seed) == (100, 100, 0)
        assert config.adam == AdamConfig(lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8)

    def test_json_round_trip(self):
        """Test configurations survive JSON serialization."""
        config = TrainingConfig(model=ModelConfig(censor=CensorMode.ADVERSARIAL, lam=20.0))
        assert TrainingConfig.model_validate_json(config.model_dump_json()) == config


class TestSweepRow:
    """Test sweep CSV rows."""

    def test_csv_row(self):
        """Test values follow the column order."""
        row = SweepRow(mode=ConditioningMode.FULL, censor=CensorMode.ADVERSARIAL, param=20.0,
                       elbo=-100.5, adv_acc=0.2, adv_ce=2.0, mi_estimate=0.3, seed=1, epochs=5)
        cells = row.csv_row()
        assert len(cells) == len(SWEEP_COLUMNS)
        assert cells[:3] == ["full", "adv", "20"]
        assert cells[-2:] == ["1", "5"]

    def test_error_markers(self):
        """Test failed runs carry ERROR in every metric column."""
        row = SweepRow(mode=ConditioningMode.BASIC, censor=CensorMode.KL, param=10.0, seed=0,
                       epochs=1, error="diverged")
        assert row.csv_row()[3:7] == ["ERROR"] * 4


class TestSettings:
    """Test environment-driven settings."""

    def test_defaults(self, monkeypatch):
        """Test defaults without environment variables."""
        monkeypatch.delenv("ACVAE_DATA_DIR", raising=False)
        monkeypatch.delenv("ACVAE_MAX_RETRIES", raising=False)
        settings = AcvaeSettings()
        assert settings.data_dir == Path("data/mnist")
        assert settings.max_retries == 3

    def test_from_env(self, monkeypatch, tmp_path):
        """Test ACVAE_* variables override defaults."""
        monkeypatch.setenv("ACVAE_DATA_DIR", str(tmp_path))
        monkeypatch.setenv("ACVAE_MAX_RETRIES", "5")
        settings = AcvaeSettings()
        assert settings.data_dir == tmp_path
        assert settings.max_retries == 5
