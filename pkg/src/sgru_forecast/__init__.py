"""
sgru-forecast - Probabilistic time-series forecasting with a stochastic GRU.

A GRU whose gates receive a Gaussian latent variable z_t is trained by
maximising a sequential evidence lower bound, with a separate GRU over the
observed targets as inference network. Forecasts are Monte-Carlo sample paths
summarised as a mean and empirical quantiles. Gradients come from the
package's own reverse-mode autodiff engine over numpy arrays.

Core Modules:
    autodiff - Tensor, primitives, backward(), grad_check()
    layers   - StochasticGRUCell, DeterministicGRUCell, MLP, LSTMCell
    gaussian - GaussianDiag, reparameterize(), log_density(), kl_diag()
    model    - GenerativeParams, InferenceParams, elbo()

    Key Functions:
        Training:
            - train(windows, cfg) -> (theta, phi, TrainReport)
            - save_checkpoint(theta, phi, cfg, scaler, path)
            - load_checkpoint(path) -> Checkpoint

        Forecasting:
            - condition(theta, phi, y_cond, x_cond) -> h_last
            - predict(theta, h_last, x_future, n_sims, rng) -> ForecastResult
            - summarize(paths, levels) -> (mean, quantiles)

        Baselines:
            - ar1_forecast(y_last, horizon)
            - fit_mlp_regressor(x, y, cfg) / mlp_predict(model, x_future)
            - fit_lstm_forecaster(windows, cfg) / fit_gru_forecaster(windows, cfg)
            - recurrent_condition(model, x_cond) / recurrent_forecast(model, state, x_future)

        Data and metrics:
            - load_csv(path, target, covariates) -> SeriesDataset
            - standardize(ds, train_span) -> (SeriesDataset, Scaler)
            - window(ds, plan) -> WindowedSeries
            - nrmse(y_true, y_pred), evaluate_horizons(y_true, y_pred, label)

Result Classes:
    TrainReport - train_elbo, val_elbo, best_epoch, stopped_early
    ForecastResult - paths, mean, quantiles; to_frame(), write_csv()
    EvalReport - nrmse per cumulative step cutoff

Basic Usage:
    from sgru_forecast import SplitPlan, TrainConfig, make_synthetic, standardize, window, train
    from sgru_forecast import condition, predict

    ds = make_synthetic(1250, seed=0)
    plan = SplitPlan(n_train=1000, n_val=200, n_cond=20, seq_len=20)
    scaled, scaler = standardize(ds, plan.train_span)
    windows = window(scaled, plan)
    theta, phi, report = train(windows, TrainConfig(latent_dim=4, hidden_dim=16, g_dim=16,
                                                    prior_mlp=(1, 16), emission_mlp=(1, 16)))
    h_last = condition(theta, phi, windows.cond.y, windows.cond.x)
    result = predict(theta, h_last, windows.pred.x, n_sims=500, rng=0, scaler=scaler)
    print(result.to_frame())

Exceptions:
    - SgruForecastError: Base exception
    - DimensionError, ContractError, NumericError: Engine and model preconditions
    - ConfigError, SchemaError, SizingError: Configuration and input data
    - CheckpointError, CheckpointVersionError, CompatibilityError: Checkpoints
    - UndefinedMetricError: nrmse of a zero-mean target
"""

__version__ = "0.1.0"

from .autodiff import Tensor, backward, grad_check, grad_check_leaves
from .baselines import (
    BaselineConfig,
    GruForecaster,
    LstmForecaster,
    MlpRegressor,
    RecurrentForecaster,
    ar1_forecast,
    fit_gru_forecaster,
    fit_lstm_forecaster,
    fit_mlp_regressor,
    lstm_forecast,
    mlp_predict,
    recurrent_condition,
    recurrent_forecast,
)
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import PROFILES, RunConfig, dump_config, load_config
from .data import (
    Scaler,
    SeriesDataset,
    SplitPlan,
    WindowedSeries,
    inverse_transform,
    load_csv,
    make_synthetic,
    standardize,
    window,
)
from .exceptions import (
    CheckpointError,
    CheckpointVersionError,
    CompatibilityError,
    ConfigError,
    ContractError,
    DimensionError,
    NumericError,
    SchemaError,
    SgruForecastError,
    SizingError,
    UndefinedMetricError,
)
from .forecast import ForecastResult, condition, predict, summarize
from .gaussian import GaussianDiag, kl_diag, log_density, reparameterize
from .layers import MLP, DeterministicGRUCell, LSTMCell, StochasticGRUCell
from .metrics import EvalReport, evaluate_horizons, nrmse, rmse
from .model import GenerativeParams, InferenceParams, elbo
from .trainer import TrainConfig, TrainReport, train

__all__ = [
    "Tensor",
    "backward",
    "grad_check",
    "grad_check_leaves",
    "StochasticGRUCell",
    "DeterministicGRUCell",
    "MLP",
    "LSTMCell",
    "GaussianDiag",
    "reparameterize",
    "log_density",
    "kl_diag",
    "GenerativeParams",
    "InferenceParams",
    "elbo",
    "TrainConfig",
    "TrainReport",
    "train",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
    "ForecastResult",
    "condition",
    "predict",
    "summarize",
    "BaselineConfig",
    "MlpRegressor",
    "LstmForecaster",
    "GruForecaster",
    "RecurrentForecaster",
    "ar1_forecast",
    "fit_mlp_regressor",
    "mlp_predict",
    "fit_lstm_forecaster",
    "fit_gru_forecaster",
    "recurrent_condition",
    "recurrent_forecast",
    "lstm_forecast",
    "SeriesDataset",
    "Scaler",
    "SplitPlan",
    "WindowedSeries",
    "load_csv",
    "standardize",
    "inverse_transform",
    "window",
    "make_synthetic",
    "EvalReport",
    "rmse",
    "nrmse",
    "evaluate_horizons",
    "RunConfig",
    "PROFILES",
    "load_config",
    "dump_config",
    "SgruForecastError",
    "DimensionError",
    "ContractError",
    "NumericError",
    "ConfigError",
    "SchemaError",
    "SizingError",
    "CheckpointError",
    "CheckpointVersionError",
    "CompatibilityError",
    "UndefinedMetricError",
]
