"""Environment-driven defaults."""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

__all__ = ["AcvaeSettings"]

DEFAULT_MNIST_URL = "https://ossci-datasets.s3.amazonaws.com/mnist"


class AcvaeSettings(BaseSettings):
    """Process-level defaults, read from ACVAE_* environment variables."""

    model_config = SettingsConfigDict(env_prefix="ACVAE_")

    data_dir: Path = Field(default=Path("data/mnist"), description="MNIST IDX directory")
    out_dir: Path = Field(default=Path("runs"), description="Root for run outputs")
    log_level: str = Field(default="INFO", description="Root logging level")
    mnist_url: str = Field(default=DEFAULT_MNIST_URL, description="Download mirror base URL")
    download_timeout: float = Field(default=30.0, gt=0, description="Seconds per request")
    max_retries: int = Field(default=3, ge=1, description="Download attempts per file")

