"""Shared fixtures: tiny models, synthetic datasets and IDX directories."""

import os
from pathlib import Path

import numpy as np
import pytest

from acvae.mnist import (
    MNIST_FILES,
    Batch,
    Dataset,
    load_mnist,
    write_idx_images,
    write_idx_labels,
)
from acvae.models import AdamConfig, ModelConfig, TrainingConfig
from acvae.types import CensorMode, ConditioningMode


def make_dataset(n, d_x=16, num_classes=4, seed=0):
    """Random images in [0, 1] with cycling labels."""
    gen = np.random.default_rng(seed)
    images = gen.uniform(0.0, 1.0, size=(n, d_x))
    labels = np.arange(n, dtype=np.int64) % num_classes
    return Dataset(images=images, labels=labels, num_classes=num_classes)


def write_mnist_dir(path, n_train=20, n_test=10, side=28, gzip_images=False, seed=0):
    """Write MNIST-named IDX files with random pixels and labels 0..9."""
    gen = np.random.default_rng(seed)
    path.mkdir(parents=True, exist_ok=True)
    for split, n in (("train", n_train), ("test", n_test)):
        images_name, labels_name = MNIST_FILES[split]
        pixels = gen.integers(0, 256, size=(n, side * side), dtype=np.uint8)
        labels = np.arange(n, dtype=np.int64) % 10
        suffix = ".gz" if gzip_images else ""
        (path / f"{images_name}{suffix}").write_bytes(
            write_idx_images(pixels, side, side, compress=gzip_images)
        )
        (path / labels_name).write_bytes(write_idx_labels(labels))
    return path


@pytest.fixture
def tiny_config():
    """FULL-mode model small enough for exhaustive checks."""
    return ModelConfig(d_x=16, d_z=3, d_s=4, hidden=8)


@pytest.fixture
def tiny_dataset():
    return make_dataset(40)


@pytest.fixture
def tiny_batch(tiny_dataset):
    return Batch.from_dataset(tiny_dataset, slice(0, 6))


@pytest.fixture
def tiny_training(tiny_config):
    """Two quick epochs on the tiny model."""
    return TrainingConfig(
        model=tiny_config,
        adam=AdamConfig(),
        epochs=2,
        batch_size=10,
        eval_batch_size=16,
        seed=3,
    )


@pytest.fixture
def censored_training(tiny_training):
    model = ModelConfig(
        d_x=16,
        d_z=3,
        d_s=4,
        hidden=8,
        mode=ConditioningMode.FULL,
        censor=CensorMode.ADVERSARIAL,
        lam=5.0,
    )
    return tiny_training.model_copy(update={"model": model})


@pytest.fixture
def mnist_dir(tmp_path):
    """Twenty training and ten test images in the real file layout."""
    return write_mnist_dir(tmp_path / "mnist")


@pytest.fixture(scope="session")
def real_mnist():
    """(train, test) from ACVAE_DATA_DIR; skips when the files are absent."""
    data_dir = Path(os.environ.get("ACVAE_DATA_DIR", "data/mnist"))
    if not any(data_dir.glob("train-images-idx3-ubyte*")):
        pytest.skip("MNIST files not available")
    return load_mnist(data_dir)
