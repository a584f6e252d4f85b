import json

import numpy as np
import pytest

from udenoise.channels import (AdditiveGaussianChannel,
                               InputScaledRayleighChannel)
from udenoise.harness import (ExperimentConfig, HarnessError, corrupt_image,
                              make_source, rmse, row_rng, run_experiment)
from udenoise.seqio import save_pgm


def _write_config(tmp_path, **overrides):
    raw = {
        "source": {"kind": "two-point", "values": [0.25, 0.75], "p": 0.5},
        "channel": "awgn:sigma=0.1",
        "loss": "squared",
        "n_values": [500],
        "k_values": [0],
        "num_seeds": 2,
        "seed": 7,
        "genie_budget": 2000,
    }
    raw.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


class TestExperimentConfig:
    def test_loads_and_validates(self, tmp_path):
        config = ExperimentConfig.from_json(_write_config(tmp_path))
        assert config.num_seeds == 2
        assert config.Delta == pytest.approx(1 / 32)

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(HarnessError, match="unknown config keys"):
            ExperimentConfig.from_json(_write_config(tmp_path, typo=1))

    def test_bad_source_kind(self, tmp_path):
        path = _write_config(tmp_path, source={"kind": "white-noise"})
        with pytest.raises(HarnessError, match="source kind"):
            ExperimentConfig.from_json(path)

    def test_missing_image(self, tmp_path):
        path = _write_config(tmp_path,
                             source={"kind": "image-file",
                                     "path": str(tmp_path / "nope.pgm")})
        with pytest.raises(HarnessError, match="image file"):
            ExperimentConfig.from_json(path)

    def test_delta_out_of_range(self, tmp_path):
        with pytest.raises(HarnessError, match="Delta"):
            ExperimentConfig.from_json(_write_config(tmp_path, Delta=2.0))

    def test_bad_channel_spec(self, tmp_path):
        with pytest.raises(ValueError):
            ExperimentConfig.from_json(
                _write_config(tmp_path, channel="awgn:sigma=0.1,typo=2"))


class TestSources:
    def test_constant(self):
        draw = make_source({"kind": "constant", "value": 0.3})
        np.testing.assert_array_equal(draw(5, row_rng(0, 0)), np.full(5, 0.3))

    def test_two_point_frequencies(self):
        draw = make_source({"kind": "two-point", "values": [0.0, 1.0],
                            "p": 0.25})
        x = draw(100_000, row_rng(1, 0))
        # p is the probability of drawing the second listed value
        assert np.mean(x == 1.0) == pytest.approx(0.25, abs=0.01)

    def test_periodic(self):
        draw = make_source({"kind": "periodic", "pattern": [0.1, 0.2, 0.3]})
        np.testing.assert_allclose(draw(7, row_rng(2, 0)),
                                   [0.1, 0.2, 0.3, 0.1, 0.2, 0.3, 0.1])

    def test_markov_stationary_fractions(self):
        draw = make_source({"kind": "markov-chain", "states": [0.0, 1.0],
                            "transition": [[0.9, 0.1], [0.3, 0.7]]})
        x = draw(200_000, row_rng(3, 0))
        # stationary distribution of the chain is (0.75, 0.25)
        assert np.mean(x == 0.0) == pytest.approx(0.75, abs=0.01)

    def test_markov_bad_transition(self):
        with pytest.raises(HarnessError):
            make_source({"kind": "markov-chain", "states": [0.0, 1.0],
                         "transition": [[0.9, 0.2], [0.3, 0.7]]})

    def test_image_file(self, tmp_path):
        image = np.arange(12, dtype=np.uint8).reshape(3, 4)
        path = tmp_path / "img.pgm"
        save_pgm(path, image)
        draw = make_source({"kind": "image-file", "path": str(path)})
        np.testing.assert_array_equal(draw(0, row_rng(4, 0)), image)


class TestCorruptImage:
    def test_awgn_noise_level(self):
        image = np.full((100, 100), 128.0)
        ch = AdditiveGaussianChannel(sigma=20.0, input_range=(0.0, 255.0))
        noisy = corrupt_image(image, ch, seed=0)
        assert rmse(image, noisy) == pytest.approx(20.0, abs=1.0)

    def test_rayleigh_mean(self):
        # Rayleigh with scale B has mean B * sqrt(pi / 2); at I = 128 and
        # slope 35/256 that is 17.5 * sqrt(pi / 2) = 21.93
        image = np.full((200, 200), 128.0)
        ch = InputScaledRayleighChannel(scale_slope=35.0 / 256.0,
                                        input_range=(1.0, 255.0))
        noisy = corrupt_image(image, ch, seed=1)
        assert noisy.mean() == pytest.approx(17.5 * np.sqrt(np.pi / 2),
                                             abs=0.3)

    def test_deterministic_in_seed(self):
        image = np.full((10, 10), 50.0)
        ch = AdditiveGaussianChannel(sigma=5.0, input_range=(0.0, 255.0))
        np.testing.assert_array_equal(corrupt_image(image, ch, 3),
                                      corrupt_image(image, ch, 3))
        assert not np.array_equal(corrupt_image(image, ch, 3),
                                  corrupt_image(image, ch, 4))


class TestRmse:
    def test_zero(self):
        assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0

    def test_known_value(self):
        assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(np.sqrt(12.5))

    def test_shape_mismatch(self):
        with pytest.raises(HarnessError):
            rmse(np.zeros(3), np.zeros((3, 1)))


class TestRunExperiment:
    def test_sweep_layout_and_outputs(self, tmp_path):
        config = ExperimentConfig.from_json(_write_config(
            tmp_path, n_values=[200, 400], k_values=[0], num_seeds=3,
            output_dir=str(tmp_path / "out")))
        rows = run_experiment(config)
        assert len(rows) == 6
        assert all(not r.error for r in rows)
        assert (tmp_path / "out" / "rows.csv").exists()
        assert (tmp_path / "out" / "timings.csv").exists()
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert {c["n"] for c in summary["cells"]} == {200, 400}
        assert summary["failed-rows"] == []

    def test_outputs_byte_identical(self, tmp_path):
        first = tmp_path / "run1"
        second = tmp_path / "run2"
        for outdir in (first, second):
            config = ExperimentConfig.from_json(_write_config(
                tmp_path, n_values=[300], num_seeds=2, output_dir=str(outdir)))
            run_experiment(config, threads=2)
        assert (first / "rows.csv").read_bytes() == \
            (second / "rows.csv").read_bytes()
        assert (first / "summary.json").read_bytes() == \
            (second / "summary.json").read_bytes()

    def test_loss_not_far_from_genie(self, tmp_path):
        config = ExperimentConfig.from_json(_write_config(
            tmp_path, n_values=[20_000], num_seeds=1,
            output_dir=str(tmp_path / "out")))
        rows = run_experiment(config)
        row = rows[0]
        assert row.cumulative_loss <= row.genie_benchmark + 0.02

    def test_failed_row_recorded(self, tmp_path):
        # n below 2k+1 cannot support a sliding window; the row must fail
        # without aborting the sweep
        config = ExperimentConfig.from_json(_write_config(
            tmp_path, n_values=[2], k_values=[1], num_seeds=1,
            output_dir=str(tmp_path / "out")))
        rows = run_experiment(config)
        assert rows[0].error != ""
        summary = json.loads((tmp_path / "out" / "summary.json").read_text())
        assert len(summary["failed-rows"]) == 1
