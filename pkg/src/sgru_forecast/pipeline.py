"""Train / forecast / evaluate / benchmark workflows behind the CLI verbs.

Every workflow is deterministic in (config, seed): the trainer, the
conditioning pass and the Monte-Carlo simulations each draw from their own
seeded stream, so re-running a command rewrites byte-identical CSV files.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .baselines import (
    ar1_forecast,
    fit_gru_forecaster,
    fit_lstm_forecaster,
    fit_mlp_regressor,
    mlp_predict,
    recurrent_condition,
    recurrent_forecast,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, apply_values, build_config, default_sections, dump_config, nest_overrides
from .data import Scaler, SeriesDataset, WindowedSeries, load_csv, make_synthetic, standardize, window
from .exceptions import CompatibilityError, ConfigError, ContractError
from .forecast import ForecastResult, condition, predict, write_point_forecast_csv
from .metrics import EvalReport, evaluate_horizons, write_eval_csv
from .model import GenerativeParams, InferenceParams
from .plot import render_forecast_svg
from .trainer import TrainReport, train, write_training_log

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "model.ckpt"
TRAINING_LOG_FILE = "training_log.csv"
CONFIG_SNAPSHOT_FILE = "resolved_config.ini"
FORECAST_FILE = "forecast.csv"
PATHS_FILE = "forecast_paths.csv"
PLOT_FILE = "forecast.svg"
EVALUATION_FILE = "evaluation.csv"
BENCHMARK_FILE = "benchmark.csv"

MODEL_LABEL = "sgru"
CONDITION_STREAM = 1
PREDICT_STREAM = 2


@dataclass
class PreparedData:
    """A dataset windowed twice: scaled (for the models) and in original units."""
    dataset: SeriesDataset
    scaler: Scaler
    windows: WindowedSeries
    raw_windows: WindowedSeries

    @property
    def truth(self) -> Optional[np.ndarray]:
        """Held-out targets of the prediction span, when the data has them."""
        return self.raw_windows.pred.y


@dataclass
class RunOutputs:
    """Files a command wrote and what it computed."""
    files: Dict[str, Path] = field(default_factory=dict)
    reports: List[EvalReport] = field(default_factory=list)
    train_report: Optional[TrainReport] = None
    forecast: Optional[ForecastResult] = None


def load_dataset(cfg: RunConfig) -> SeriesDataset:
    data = cfg.data
    if data.source == "synthetic":
        return make_synthetic(data.synthetic_rows, seed=data.synthetic_seed)
    if not data.path:
        raise ConfigError("a dataset path is required for csv sources", field="data.path")
    if not data.covariates:
        raise ConfigError("at least one covariate column is required", field="data.covariates")
    return load_csv(data.path, data.target, data.covariates, data.timestamp)


def prepare_data(cfg: RunConfig, scaler: Optional[Scaler] = None) -> PreparedData:
    """Load, size-check, standardise and window the configured dataset.

    With ``scaler`` given (from a checkpoint) its statistics are reused instead
    of being refitted on the training span.
    """
    dataset = load_dataset(cfg)
    raw_windows = window(dataset, cfg.split)
    if scaler is None:
        scaled, scaler = standardize(dataset, cfg.split.train_span)
    else:
        if list(scaler.columns) != list(dataset.covariate_names):
            raise ConfigError(
                f"checkpoint was trained on covariates {scaler.columns}, data has {dataset.covariate_names}",
                field="data.covariates",
            )
        scaled = replace(dataset, x=scaler.transform_x(dataset.x), y=scaler.transform_y(dataset.y))
    return PreparedData(dataset, scaler, window(scaled, cfg.split), raw_windows)


def _stream(seed: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), stream])


def forecast_model(
    theta: GenerativeParams,
    phi: InferenceParams,
    prepared: PreparedData,
    cfg: RunConfig,
) -> ForecastResult:
    """Condition on the conditioning span from a zero state, then simulate the prediction span."""
    cond = prepared.windows.cond
    h_last = condition(
        theta,
        phi,
        cond.y,
        cond.x,
        rng=np.random.default_rng(_stream(cfg.seed, CONDITION_STREAM)),
        latent=cfg.forecast.cond_latent,
    )
    return predict(
        theta,
        h_last,
        prepared.windows.pred.x,
        n_sims=cfg.forecast.n_sims,
        rng=_stream(cfg.seed, PREDICT_STREAM),
        scaler=prepared.scaler,
        levels=cfg.forecast.levels,
    )


def _history_tail(prepared: PreparedData, horizon: int) -> np.ndarray:
    return prepared.raw_windows.history_y()[-3 * horizon:]


def write_forecast_outputs(
    result: ForecastResult,
    prepared: PreparedData,
    cfg: RunConfig,
    out_dir: Path,
    outputs: RunOutputs,
) -> None:
    outputs.forecast = result
    outputs.files["forecast"] = result.write_csv(out_dir / FORECAST_FILE)
    if cfg.forecast.write_paths:
        outputs.files["paths"] = result.write_paths_csv(out_dir / PATHS_FILE)
    lower, upper = result.interval()
    outputs.files["plot"] = render_forecast_svg(
        out_dir / PLOT_FILE,
        history=_history_tail(prepared, result.horizon),
        mean=result.mean,
        lower=lower,
        upper=upper,
        actual=prepared.truth,
        title=f"{prepared.dataset.target_name}: {result.horizon}-step forecast ({result.n_sims} paths)",
    )


def _output_dir(cfg: RunConfig) -> Path:
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def config_from_checkpoint(
    checkpoint: Checkpoint,
    overrides: Optional[Dict[str, Any]] = None,
) -> Optional[RunConfig]:
    """RunConfig stored in a checkpoint's metadata with dotted ``overrides`` applied, if any."""
    stored = checkpoint.extra.get("run_config")
    if not stored:
        return None
    sections = default_sections()
    apply_values(sections, stored)
    apply_values(sections, nest_overrides(overrides))
    return build_config(sections)


def check_compatible(checkpoint: Checkpoint, cfg: RunConfig, input_dim: int) -> None:
    """Raise CompatibilityError when the checkpoint and config/data dimensions differ."""
    expected = {"input_dim": int(input_dim), **cfg.model.dims()}
    found = {k: checkpoint.dims[k] for k in expected if k in checkpoint.dims}
    if found != expected:
        raise CompatibilityError(found, expected)


def run_train(cfg: RunConfig) -> RunOutputs:
    """Fit the stochastic GRU; write the checkpoint, training log and config snapshot."""
    out_dir = _output_dir(cfg)
    prepared = prepare_data(cfg)
    theta, phi, report = train(prepared.windows, cfg.model, seed=cfg.seed)

    outputs = RunOutputs(train_report=report)
    outputs.files["checkpoint"] = save_checkpoint(
        theta,
        phi,
        cfg.model,
        prepared.scaler,
        out_dir / CHECKPOINT_FILE,
        extra={"run_config": cfg.to_sections(), "target": prepared.dataset.target_name},
    )
    outputs.files["training_log"] = write_training_log(report, out_dir / TRAINING_LOG_FILE)
    outputs.files["config"] = dump_config(cfg, out_dir / CONFIG_SNAPSHOT_FILE)
    logger.info(
        "Trained %d epochs (best %d, val_elbo=%.5f) in %.1fs",
        report.epochs_run,
        report.best_epoch,
        report.best_val_elbo,
        report.wall_time,
    )
    return outputs


def _restore(
    checkpoint_path,
    cfg: Optional[RunConfig],
    overrides: Optional[Dict[str, Any]],
) -> Tuple[Checkpoint, RunConfig, PreparedData]:
    checkpoint = load_checkpoint(checkpoint_path)
    if cfg is None:
        cfg = config_from_checkpoint(checkpoint, overrides)
        if cfg is None:
            raise ConfigError("checkpoint carries no run configuration; pass --config or --profile", field="run")
    prepared = prepare_data(cfg, scaler=checkpoint.scaler)
    check_compatible(checkpoint, cfg, prepared.dataset.n_covariates)
    return checkpoint, cfg, prepared


def run_forecast(
    checkpoint_path,
    cfg: Optional[RunConfig] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunOutputs:
    """Forecast the prediction span from a trained checkpoint.

    Without ``cfg`` the configuration stored in the checkpoint is used, with
    ``overrides`` (dotted section.key pairs) applied on top.
    """
    checkpoint, cfg, prepared = _restore(checkpoint_path, cfg, overrides)
    out_dir = _output_dir(cfg)
    outputs = RunOutputs()
    result = forecast_model(checkpoint.generative, checkpoint.inference, prepared, cfg)
    write_forecast_outputs(result, prepared, cfg, out_dir, outputs)
    outputs.files["config"] = dump_config(cfg, out_dir / CONFIG_SNAPSHOT_FILE)
    return outputs


def _require_truth(prepared: PreparedData) -> np.ndarray:
    if prepared.truth is None:
        raise ContractError("The prediction span has no held-out targets to score against")
    return prepared.truth


def run_evaluate(
    checkpoint_path,
    cfg: Optional[RunConfig] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunOutputs:
    """Forecast from a checkpoint and score it (and AR(1) persistence) against held-out targets."""
    checkpoint, cfg, prepared = _restore(checkpoint_path, cfg, overrides)
    truth = _require_truth(prepared)
    out_dir = _output_dir(cfg)
    outputs = RunOutputs()
    result = forecast_model(checkpoint.generative, checkpoint.inference, prepared, cfg)
    write_forecast_outputs(result, prepared, cfg, out_dir, outputs)

    ar1 = ar1_forecast(prepared.raw_windows.cond.y[-1], result.horizon)
    outputs.reports = [
        evaluate_horizons(truth, result.mean, MODEL_LABEL),
        evaluate_horizons(truth, ar1, "ar1"),
    ]
    outputs.files["evaluation"] = write_eval_csv(outputs.reports, out_dir / EVALUATION_FILE)
    outputs.files["config"] = dump_config(cfg, out_dir / CONFIG_SNAPSHOT_FILE)
    return outputs


def baseline_forecasts(prepared: PreparedData, cfg: RunConfig) -> Dict[str, np.ndarray]:
    """Mean forecasts in original units of every enabled baseline."""
    windows = prepared.windows
    horizon = windows.horizon
    forecasts: Dict[str, np.ndarray] = {}
    bcfg = cfg.baselines

    if bcfg.ar1:
        forecasts["ar1"] = ar1_forecast(prepared.raw_windows.cond.y[-1], horizon)
    if bcfg.mlp:
        x_train = np.concatenate([s.x for s in windows.train])
        y_train = np.concatenate([s.y for s in windows.train])
        model = fit_mlp_regressor(x_train, y_train, bcfg, windows.val.x, windows.val.y)
        forecasts["mlp"] = prepared.scaler.inverse_y(mlp_predict(model, windows.pred.x))
    for name, fit in (("lstm", fit_lstm_forecaster), ("gru", fit_gru_forecaster)):
        if getattr(bcfg, name):
            model = fit(windows, bcfg)
            state = recurrent_condition(model, windows.cond.x)
            forecasts[name] = prepared.scaler.inverse_y(recurrent_forecast(model, state, windows.pred.x, horizon))
    return forecasts


def run_benchmark(cfg: RunConfig) -> RunOutputs:
    """Train every enabled model on identical splits and tabulate nrmse per step cutoff."""
    out_dir = _output_dir(cfg)
    prepared = prepare_data(cfg)
    truth = _require_truth(prepared)

    theta, phi, report = train(prepared.windows, cfg.model, seed=cfg.seed)
    outputs = RunOutputs(train_report=report)
    result = forecast_model(theta, phi, prepared, cfg)
    write_forecast_outputs(result, prepared, cfg, out_dir, outputs)
    outputs.reports.append(evaluate_horizons(truth, result.mean, MODEL_LABEL))

    for name, mean in baseline_forecasts(prepared, cfg).items():
        outputs.files[f"forecast_{name}"] = write_point_forecast_csv(mean, out_dir / f"forecast_{name}.csv")
        outputs.reports.append(evaluate_horizons(truth, mean, name))

    outputs.files["benchmark"] = write_eval_csv(outputs.reports, out_dir / BENCHMARK_FILE)
    outputs.files["training_log"] = write_training_log(report, out_dir / TRAINING_LOG_FILE)
    outputs.files["config"] = dump_config(cfg, out_dir / CONFIG_SNAPSHOT_FILE)
    return outputs
