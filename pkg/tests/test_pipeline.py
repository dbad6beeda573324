"""End-to-end tests of the train/forecast/evaluate/benchmark workflows on tiny synthetic runs."""

import numpy as np
import pandas as pd
import pytest

from sgru_forecast.config import load_config
from sgru_forecast.data import make_synthetic
from sgru_forecast.exceptions import CompatibilityError, ConfigError, ContractError
from sgru_forecast.pipeline import (
    BENCHMARK_FILE,
    CHECKPOINT_FILE,
    CONFIG_SNAPSHOT_FILE,
    EVALUATION_FILE,
    FORECAST_FILE,
    PATHS_FILE,
    PLOT_FILE,
    TRAINING_LOG_FILE,
    load_dataset,
    run_benchmark,
    run_evaluate,
    run_forecast,
    run_train,
)

TINY = {
    "data.synthetic_rows": 80,
    "split.n_train": 40,
    "split.n_val": 10,
    "split.n_cond": 5,
    "split.seq_len": 10,
    "split.n_pred": 10,
    "model.latent_dim": 2,
    "model.hidden_dim": 3,
    "model.g_dim": 3,
    "model.prior_mlp": [1, 4],
    "model.emission_mlp": [1, 4],
    "training.epochs": 2,
    "training.patience": 0,
    "forecast.n_sims": 20,
    "baselines.epochs": 2,
    "baselines.patience": 0,
    "baselines.lstm_hidden": 3,
}


def tiny_config(out_dir, **extra):
    return load_config(profile="synthetic", overrides={**TINY, "run.output_dir": str(out_dir), **extra})


@pytest.fixture
def trained(tmp_path):
    """A trained tiny model and its output directory."""
    out_dir = tmp_path / "run"
    outputs = run_train(tiny_config(out_dir))
    return outputs, out_dir


class TestTrain:
    """Test the train workflow."""

    def test_writes_artifacts(self, trained):
        """Checkpoint, training log and config snapshot are written."""
        outputs, out_dir = trained
        for name in (CHECKPOINT_FILE, TRAINING_LOG_FILE, CONFIG_SNAPSHOT_FILE):
            assert (out_dir / name).exists()
        log = pd.read_csv(out_dir / TRAINING_LOG_FILE)
        assert len(log) == outputs.train_report.epochs_run == 2

    def test_rerun_is_byte_identical(self, trained):
        """Training again with the same config rewrites the same checkpoint."""
        _, out_dir = trained
        first = (out_dir / CHECKPOINT_FILE).read_bytes()
        run_train(tiny_config(out_dir))
        assert (out_dir / CHECKPOINT_FILE).read_bytes() == first

    def test_snapshot_reproduces_config(self, trained):
        """The resolved config reloads to the config that was run."""
        _, out_dir = trained
        assert load_config(out_dir / CONFIG_SNAPSHOT_FILE) == tiny_config(out_dir)


class TestForecast:
    """Test forecasting from a checkpoint."""

    def test_forecast_from_checkpoint_alone(self, trained):
        """The stored run config drives the forecast."""
        _, out_dir = trained
        outputs = run_forecast(out_dir / CHECKPOINT_FILE)
        frame = pd.read_csv(out_dir / FORECAST_FILE)
        assert list(frame.columns) == ["step", "mean", "q05", "q50", "q95"]
        assert len(frame) == 10
        assert outputs.forecast.n_sims == 20
        assert (out_dir / PLOT_FILE).exists()

    def test_forecast_is_reproducible(self, trained):
        """Two forecasts with the same seed write identical CSV files."""
        _, out_dir = trained
        run_forecast(out_dir / CHECKPOINT_FILE)
        first = (out_dir / FORECAST_FILE).read_bytes()
        run_forecast(out_dir / CHECKPOINT_FILE)
        assert (out_dir / FORECAST_FILE).read_bytes() == first

    def test_overrides_apply_on_top(self, trained, tmp_path):
        """Dotted overrides change the stored config."""
        _, out_dir = trained
        other = tmp_path / "other"
        outputs = run_forecast(
            out_dir / CHECKPOINT_FILE,
            overrides={"forecast.n_sims": 5, "forecast.write_paths": True, "run.output_dir": str(other)},
        )
        assert outputs.forecast.n_sims == 5
        assert pd.read_csv(other / PATHS_FILE).shape == (10, 6)

    def test_quantiles_bracket_mean(self, trained):
        """q05 <= q95 at every step."""
        _, out_dir = trained
        result = run_forecast(out_dir / CHECKPOINT_FILE).forecast
        assert np.all(result.quantiles[0.05] <= result.quantiles[0.95])

    def test_incompatible_config(self, trained, tmp_path):
        """A config with other dimensions than the checkpoint is rejected."""
        _, out_dir = trained
        cfg = tiny_config(tmp_path / "x", **{"model.hidden_dim": 4})
        with pytest.raises(CompatibilityError):
            run_forecast(out_dir / CHECKPOINT_FILE, cfg=cfg)


class TestEvaluate:
    """Test evaluation against held-out targets."""

    def test_scores_model_and_persistence(self, trained):
        """evaluation.csv has the stochastic GRU and AR(1) at cutoffs 5 and 10."""
        _, out_dir = trained
        outputs = run_evaluate(out_dir / CHECKPOINT_FILE)
        assert [r.label for r in outputs.reports] == ["sgru", "ar1"]
        frame = pd.read_csv(out_dir / EVALUATION_FILE)
        assert list(frame.columns) == ["model", "5", "10"]

    def test_needs_held_out_targets(self, tmp_path):
        """Without targets in the prediction span evaluation is refused."""
        ds = make_synthetic(80, seed=2)
        frame = pd.DataFrame({"y": ds.y, "phase_sin": ds.x[:, 0], "phase_cos": ds.x[:, 1]})
        frame.loc[60:, "y"] = np.nan
        csv = tmp_path / "series.csv"
        frame.to_csv(csv, index=False)

        cfg = tiny_config(tmp_path / "run", **{"data.source": "csv", "data.path": str(csv)})
        run_train(cfg)
        with pytest.raises(ContractError):
            run_evaluate(tmp_path / "run" / CHECKPOINT_FILE)
        assert run_forecast(tmp_path / "run" / CHECKPOINT_FILE).forecast.horizon == 10


class TestBenchmark:
    """Test the benchmark workflow."""

    def test_every_model_is_scored(self, tmp_path):
        """All enabled models appear in benchmark.csv with their own forecast file."""
        out_dir = tmp_path / "bench"
        outputs = run_benchmark(tiny_config(out_dir))
        labels = [r.label for r in outputs.reports]
        assert labels == ["sgru", "ar1", "mlp", "lstm", "gru"]
        frame = pd.read_csv(out_dir / BENCHMARK_FILE)
        assert frame["model"].tolist() == labels
        for name in labels[1:]:
            assert (out_dir / f"forecast_{name}.csv").exists()

    def test_disabled_baselines_skipped(self, tmp_path):
        """Only enabled baselines run."""
        cfg = tiny_config(tmp_path, **{"baselines.lstm": False, "baselines.gru": False, "baselines.mlp": False})
        assert [r.label for r in run_benchmark(cfg).reports] == ["sgru", "ar1"]

    def test_short_horizon_scored_in_full(self, tmp_path):
        """A 3-step forecast is scored over its 3 steps."""
        cfg = tiny_config(
            tmp_path,
            **{"split.n_pred": 3, "baselines.lstm": False, "baselines.gru": False, "baselines.mlp": False},
        )
        outputs = run_benchmark(cfg)
        assert all(r.cutoffs == [3] for r in outputs.reports)
        frame = pd.read_csv(tmp_path / BENCHMARK_FILE)
        assert list(frame.columns) == ["model", "3"]

    @pytest.mark.slow
    def test_synthetic_acceptance(self, tmp_path):
        """At 30 steps the stochastic GRU beats AR(1) for 4 of 5 seeds and is within 1.1x of the LSTM for 3 of 5."""
        beats_ar1 = 0
        near_lstm = 0
        for seed in range(5):
            cfg = load_config(
                profile="synthetic",
                overrides={
                    "run.seed": seed,
                    "run.output_dir": str(tmp_path / str(seed)),
                    "baselines.mlp": False,
                    "baselines.gru": False,
                },
            )
            scores = {r.label: r.scores[30] for r in run_benchmark(cfg).reports}
            beats_ar1 += scores["sgru"] < scores["ar1"]
            near_lstm += scores["sgru"] <= 1.1 * scores["lstm"]
        assert beats_ar1 >= 4
        assert near_lstm >= 3


class TestLoadDataset:
    """Test dataset source selection."""

    def test_csv_source_needs_path(self, tmp_path):
        """A csv source without a path is a config error."""
        cfg = tiny_config(tmp_path, **{"data.source": "csv"})
        with pytest.raises(ConfigError) as excinfo:
            load_dataset(cfg)
        assert excinfo.value.field == "data.path"
