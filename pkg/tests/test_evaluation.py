"""Tests for evaluation metrics and image-grid artifacts."""

import math

import numpy as np
import pytest

from acvae.evaluation import (
    ImageGrid,
    append_metrics_row,
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
from acvae.exceptions import DataError, UnsupportedModeError
from acvae.mnist import Batch, Dataset
from acvae.models import METRICS_COLUMNS, MetricsRecord, ModelConfig
from acvae.networks import build_networks
from acvae.stochastic import Rng
from acvae.training import elbo_batch
from acvae.types import ConditioningMode


@pytest.fixture
def networks(tiny_config):
    return build_networks(tiny_config, Rng(2))


class TestMetrics:
    """Test quantitative evaluation."""

    def test_elbo_matches_training_computation(self, tiny_config, tiny_dataset, networks):
        """Test eval_elbo agrees with the training objective on identical noise."""
        batch = Batch.from_dataset(tiny_dataset, slice(0, len(tiny_dataset)))
        report = elbo_batch(
            networks.encoder, networks.decoder, batch, tiny_config.mode, 1, 1.0, Rng(3)
        )
        value = eval_elbo(networks.encoder, networks.decoder, tiny_dataset, tiny_config.mode,
                          Rng(3), chunk_size=1000)
        assert value == pytest.approx(report.elbo_term, abs=1e-10)

    def test_adversary_metrics(self, tiny_config, tiny_dataset, networks):
        """Test accuracy range and the MI identity."""
        acc, ce, mi = eval_adversary(networks.adversary, networks.encoder, tiny_dataset,
                                     tiny_config.mode, Rng(0), chunk_size=7)
        assert 0.0 <= acc <= 1.0
        assert ce > 0
        assert mi == pytest.approx(math.log(4) - ce, abs=1e-12)

    def test_evaluate_record(self, tiny_config, tiny_dataset, networks):
        """Test the combined record is reproducible and consistent."""
        a = evaluate(networks, tiny_dataset, tiny_config, Rng(5), epoch=3, chunk_size=16)
        b = evaluate(networks, tiny_dataset, tiny_config, Rng(5), epoch=3, chunk_size=16)
        assert a.model_dump(exclude={"train_elbo"}) == b.model_dump(exclude={"train_elbo"})
        assert a.epoch == 3
        assert a.elbo == pytest.approx(a.recon - a.kl, abs=1e-10)

    def test_zero_weight_elbo(self):
        """Test zero-weight networks on grey images give KL = 0 and recon = 784 ln 0.5."""
        config = ModelConfig(d_z=3, hidden=8)
        nets = build_networks(config, None)
        ds = Dataset(images=np.full((20, 784), 0.5), labels=np.arange(20) % 10)
        record = evaluate(nets, ds, config, Rng(1), chunk_size=7)
        assert record.kl == pytest.approx(0.0, abs=1e-12)
        assert record.recon == pytest.approx(784 * math.log(0.5), rel=1e-12)
        assert record.elbo == pytest.approx(-543.427, abs=1e-3)

    def test_zero_weight_adversary(self):
        """Test uniform logits predict class 0 with CE = ln 10 and no information."""
        config = ModelConfig(d_z=3, hidden=8)
        nets = build_networks(config, None)
        labels = np.array([0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9])
        ds = Dataset(images=np.full((12, 784), 0.5), labels=labels)
        acc, ce, mi = eval_adversary(nets.adversary, nets.encoder, ds, config.mode, Rng(0),
                                     chunk_size=5)
        assert acc == pytest.approx(0.25)
        assert ce == pytest.approx(math.log(10), abs=1e-12)
        assert mi == pytest.approx(0.0, abs=1e-12)

    def test_evaluation_leaves_no_cache(self, tiny_config, tiny_dataset, networks):
        """Test evaluation runs read-only forward passes."""
        evaluate(networks, tiny_dataset, tiny_config, Rng(5))
        for net in networks.all():
            assert all(layer.cache is None for layer in net.layers)


class TestImageGrid:
    """Test grid tiling and quantization."""

    def test_quantization(self):
        """Test values round half-up to 8 bits."""
        cells = np.array([[0.0, 1.0, 0.5, 0.2]])
        grid = ImageGrid.from_cells(cells, rows=1, cols=1)
        np.testing.assert_array_equal(grid.pixels, [[0, 255], [128, 51]])

    def test_tiling(self):
        """Test cells are laid out row-major."""
        cells = np.stack([np.full(4, v) for v in (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)])
        grid = ImageGrid.from_cells(cells, rows=2, cols=3)
        assert (grid.height, grid.width) == (4, 6)
        assert grid.pixels[0, 2] == 51
        assert grid.pixels[3, 5] == 255

    def test_non_square_cells(self):
        """Test cells must be square images."""
        with pytest.raises(DataError):
            ImageGrid.from_cells(np.zeros((1, 5)), rows=1, cols=1)


class TestGrids:
    """Test style-transfer, sampling and example grids."""

    def test_transfer_layout(self, tiny_config, tiny_dataset, networks):
        """Test originals on the first row and one row per class."""
        examples = tiny_dataset.subset(5)
        grid = style_transfer_grid(networks.encoder, networks.decoder, examples,
                                   tiny_config.mode, Rng(0))
        assert (grid.rows, grid.cols) == (5, 5)
        originals = ImageGrid.from_cells(examples.images, rows=1, cols=5)
        np.testing.assert_array_equal(grid.pixels[:4], originals.pixels)

    def test_transfer_unsupported_for_basic(self, tiny_config, tiny_dataset):
        """Test BASIC models cannot transfer style."""
        config = tiny_config.model_copy(update={"mode": ConditioningMode.BASIC})
        nets = build_networks(config, Rng(0))
        with pytest.raises(UnsupportedModeError) as exc_info:
            style_transfer_grid(nets.encoder, nets.decoder, tiny_dataset.subset(2),
                                config.mode, Rng(0))
        assert exc_info.value.mode == "basic"

    def test_sampling_grid_deterministic(self, tiny_config, networks):
        """Test the same stream gives identical pixels."""
        a = sampling_grid(networks.decoder, tiny_config.mode, Rng(1), rows=3, cols=4)
        b = sampling_grid(networks.decoder, tiny_config.mode, Rng(1), rows=3, cols=4)
        np.testing.assert_array_equal(a.pixels, b.pixels)
        assert (a.height, a.width) == (12, 16)

    def test_zero_latent_columns_identical(self, tiny_config, networks):
        """Test z = 0 makes every row of a column the same image."""
        grid = sampling_grid(networks.decoder, tiny_config.mode, Rng(1), rows=3, cols=4,
                             z=np.zeros((12, 3)))
        cells = grid.pixels.reshape(3, 4, 4, 4).transpose(0, 2, 1, 3)
        for row in range(1, 3):
            np.testing.assert_array_equal(cells[row], cells[0])
        assert not np.array_equal(cells[0, 0], cells[0, 1])

    def test_example_grid(self, tiny_dataset):
        """Test example grids draw real images."""
        grid = example_grid(tiny_dataset, 2, 3, Rng(0))
        assert (grid.rows, grid.cols) == (2, 3)

    def test_example_grid_too_small(self, tiny_dataset):
        """Test more cells than images is an error."""
        with pytest.raises(DataError):
            example_grid(tiny_dataset, 10, 10, Rng(0))


class TestArtifacts:
    """Test PGM and CSV artifacts."""

    def test_pgm_round_trip(self, tmp_path):
        """Test a written PGM has the P5 header and reads back."""
        grid = ImageGrid.from_cells(np.linspace(0, 1, 32).reshape(2, 16), rows=1, cols=2)
        path = tmp_path / "grids" / "sample.pgm"
        write_pgm(grid, path)
        assert path.read_bytes().startswith(b"P5\n8 4\n255\n")
        np.testing.assert_array_equal(read_pgm(path), grid.pixels)

    def test_metrics_csv(self, tmp_path):
        """Test rows append under a single header and parse back exactly."""
        path = tmp_path / "metrics.csv"
        records = [
            MetricsRecord(epoch=e, elbo=-100.0 / e, recon=-90.0, kl=10.0 / 3, adv_ce=1.2,
                          adv_acc=0.25, mi_estimate=math.log(10) - 1.2)
            for e in (1, 2)
        ]
        for record in records:
            append_metrics_row(path, record)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(METRICS_COLUMNS)
        assert len(lines) == 3
        parsed = read_metrics_csv(path)
        assert [r.model_dump(exclude={"train_elbo"}) for r in parsed] == [
            r.model_dump(exclude={"train_elbo"}) for r in records
        ]
