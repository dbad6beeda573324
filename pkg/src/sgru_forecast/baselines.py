"""Comparison models: AR(1) persistence, MLP covariate regression, LSTM and GRU forecasters.

All trainable baselines work on the standardised series produced by
``data.standardize`` and consume the same WindowedSeries as the stochastic
GRU. AR(1) persistence needs no training and works in original units.
"""

from __future__ import annotations

import abc
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from .autodiff import Tensor, backward, scale, square, sum_all
from .data import Span, WindowedSeries
from .exceptions import ConfigError, ContractError, NumericError
from .layers import ACTIVATIONS, MLP, DeterministicGRUCell, LSTMCell, Module
from .trainer import Adam

logger = logging.getLogger(__name__)

BASELINE_NAMES = ("ar1", "lstm", "mlp", "gru")


@dataclass
class BaselineConfig:
    """Which baselines run and how they are fitted.

    The MLP regressor defaults to two hidden layers of five ReLU units and a
    linear output (three weight layers).
    """
    ar1: bool = True
    lstm: bool = True
    mlp: bool = True
    gru: bool = True
    lstm_hidden: int = 64
    mlp_hidden_layers: int = 2
    mlp_width: int = 5
    mlp_activation: str = "relu"
    epochs: int = 300
    learning_rate: float = 0.001
    patience: int = 30
    clip_norm: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        for name in ("lstm_hidden", "mlp_width", "epochs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"must be positive, got {getattr(self, name)}", field=f"baselines.{name}")
        if self.mlp_hidden_layers < 0:
            raise ConfigError(f"must be non-negative, got {self.mlp_hidden_layers}", field="baselines.mlp_hidden_layers")
        if self.mlp_activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.mlp_activation!r}", field="baselines.mlp_activation")
        if self.learning_rate < 0:
            raise ConfigError(f"must be non-negative, got {self.learning_rate}", field="baselines.learning_rate")
        if self.patience < 0:
            raise ConfigError(f"must be non-negative, got {self.patience}", field="baselines.patience")
        if self.clip_norm <= 0:
            raise ConfigError(f"must be positive, got {self.clip_norm}", field="baselines.clip_norm")

    @property
    def enabled(self) -> List[str]:
        return [name for name in BASELINE_NAMES if getattr(self, name)]

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "BaselineConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class FitHistory:
    """Per-epoch mean squared errors of a baseline fit."""
    train_loss: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    best_epoch: int = 0


def ar1_forecast(y_last: float, horizon: int) -> np.ndarray:
    """Persistence forecast: the last observed value repeated ``horizon`` times."""
    if int(horizon) < 1:
        raise ContractError(f"horizon must be at least 1, got {horizon}")
    value = float(y_last)
    if not np.isfinite(value):
        raise ContractError(f"Last observed value must be finite, got {value}")
    return np.full(int(horizon), value)


def _mse(pred: Tensor, target) -> Tensor:
    """Mean squared error between a (1, n) or (1,) prediction and targets."""
    target = np.asarray(target, dtype=np.float64).reshape(pred.shape)
    return scale(sum_all(square(pred - Tensor(target))), 1.0 / target.size)


def _optimizer(model: Module, cfg: BaselineConfig) -> Adam:
    return Adam(model.parameters(), lr=cfg.learning_rate, clip_norm=cfg.clip_norm)


def _restore(model: Module, values: Optional[List[np.ndarray]]) -> None:
    if values is not None:
        for p, value in zip(model.parameters(), values):
            p.value[...] = value


class MlpRegressor(Module):
    """Pointwise map y_t = f(x_t); time plays no role."""

    def __init__(self, input_dim: int, cfg: BaselineConfig, rng: Optional[np.random.Generator] = None) -> None:
        self.mlp = MLP(input_dim, 1, cfg.mlp_hidden_layers, cfg.mlp_width, cfg.mlp_activation, "identity", rng)
        self.history = FitHistory()

    @property
    def input_dim(self) -> int:
        return self.mlp.input_dim

    def forward(self, x_rows) -> Tensor:
        """Batched forward over rows of ``x_rows`` (shape (n, N)); returns shape (1, n)."""
        x = np.asarray(x_rows, dtype=np.float64)
        if x.ndim == 1:
            x = x.reshape(-1, self.input_dim)
        return self.mlp.forward(Tensor(x.T))


def fit_mlp_regressor(
    x_train,
    y_train,
    cfg: BaselineConfig,
    x_val=None,
    y_val=None,
) -> MlpRegressor:
    """Full-batch Adam on mean squared error.

    With validation data the parameters of the best validation epoch are
    kept and training stops after ``cfg.patience`` epochs without improvement.

    Raises:
        ContractError: If the training set is empty or lengths disagree
        NumericError: If the loss becomes non-finite
    """
    x = np.asarray(x_train, dtype=np.float64)
    y = np.asarray(y_train, dtype=np.float64).reshape(-1)
    if x.ndim != 2 or len(x) == 0 or len(x) != len(y):
        raise ContractError(f"Need aligned non-empty training rows, got x {x.shape} and y {y.shape}")
    use_val = x_val is not None and y_val is not None and len(y_val) > 0

    model = MlpRegressor(x.shape[1], cfg, np.random.default_rng(cfg.seed))
    optimizer = _optimizer(model, cfg)
    best: Optional[List[np.ndarray]] = None
    best_loss = float("inf")
    since_best = 0

    for epoch in range(1, cfg.epochs + 1):
        optimizer.zero_grad()
        loss = _mse(model.forward(x), y)
        if not np.isfinite(loss.item()):
            raise NumericError("MLP regressor loss is non-finite", epoch=epoch)
        backward(loss)
        optimizer.step()
        model.history.train_loss.append(loss.item())
        if not use_val:
            continue

        val_loss = _mse(model.forward(x_val), y_val).item()
        model.history.val_loss.append(val_loss)
        if val_loss < best_loss:
            best_loss, best, since_best = val_loss, [p.value.copy() for p in model.parameters()], 0
            model.history.best_epoch = epoch
        else:
            since_best += 1
            if cfg.patience and since_best >= cfg.patience:
                break

    _restore(model, best)
    logger.info(
        "MLP regressor fitted: %d epochs, final train mse %.5f",
        len(model.history.train_loss),
        model.history.train_loss[-1],
    )
    return model


def mlp_predict(model: MlpRegressor, x_future) -> np.ndarray:
    """Apply the regressor row by row; output length equals the number of rows."""
    x = np.asarray(x_future, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ContractError(f"Need a non-empty (rows, N) covariate matrix, got {x.shape}")
    return model.forward(x).value[0].copy()


State = Union[Tensor, Tuple[Tensor, Tensor]]


class RecurrentForecaster(Module, metaclass=abc.ABCMeta):
    """Recurrent cell plus a linear head predicting y_t from the state after x_t."""

    kind = "recurrent"

    def __init__(self, input_dim: int, hidden_dim: int, rng: Optional[np.random.Generator] = None) -> None:
        self.cell = self._make_cell(input_dim, hidden_dim, rng)
        self.head = MLP(hidden_dim, 1, hidden_layers=0, rng=rng)
        self.history = FitHistory()

    @abc.abstractmethod
    def _make_cell(self, input_dim: int, hidden_dim: int, rng) -> Module:
        """Builds the recurrent cell."""

    @property
    def input_dim(self) -> int:
        return self.cell.input_dim

    @property
    def hidden_dim(self) -> int:
        return self.cell.hidden_dim

    @abc.abstractmethod
    def initial_state(self) -> State:
        """Zero state before the first step."""

    @abc.abstractmethod
    def advance(self, state: State, x) -> State:
        """One cell step on covariate row x."""

    @abc.abstractmethod
    def output(self, state: State) -> Tensor:
        """Prediction of y from the state."""

    @abc.abstractmethod
    def detach(self, state: State) -> State:
        """Copy of the state cut from the graph."""


class LstmForecaster(RecurrentForecaster):
    """LSTM baseline; the state is the pair (h, c)."""

    kind = "lstm"

    def _make_cell(self, input_dim, hidden_dim, rng) -> Module:
        return LSTMCell(input_dim, hidden_dim, rng)

    def initial_state(self) -> State:
        return self.cell.initial_state()

    def advance(self, state, x) -> State:
        return self.cell.step(state, x)

    def output(self, state) -> Tensor:
        return self.head(state[0])

    def detach(self, state) -> State:
        return state[0].detach(), state[1].detach()


class GruForecaster(RecurrentForecaster):
    """Deterministic GRU baseline, the stochastic cell without its latent input."""

    kind = "gru"

    def _make_cell(self, input_dim, hidden_dim, rng) -> Module:
        return DeterministicGRUCell(input_dim, hidden_dim, rng)

    def initial_state(self) -> State:
        return Tensor(np.zeros(self.hidden_dim))

    def advance(self, state, x) -> State:
        return self.cell.step(state, x)

    def output(self, state) -> Tensor:
        return self.head(state)

    def detach(self, state) -> State:
        return state.detach()


def _span_loss(model: RecurrentForecaster, span: Span, state: State) -> Tuple[Tensor, State]:
    if span.y is None:
        raise ContractError(f"Span [{span.start}, {span.stop}) has no observed targets")
    total: Optional[Tensor] = None
    for t in range(len(span)):
        state = model.advance(state, span.x[t])
        err = square(model.output(state) - Tensor([span.y[t]]))
        total = err if total is None else total + err
    return scale(sum_all(total), 1.0 / len(span)), state


def fit_recurrent(model: RecurrentForecaster, windows: WindowedSeries, cfg: BaselineConfig) -> RecurrentForecaster:
    """Squared-error training over the training subsequences, one Adam step each.

    Subsequences are visited in order with the detached final state carried
    forward, and the validation span is scored from the end-of-epoch state.
    """
    if not windows.train:
        raise ContractError("Training span is empty")
    optimizer = _optimizer(model, cfg)
    best: Optional[List[np.ndarray]] = None
    best_loss = float("inf")
    since_best = 0

    for epoch in range(1, cfg.epochs + 1):
        state = model.initial_state()
        total = 0.0
        for i, span in enumerate(windows.train):
            optimizer.zero_grad()
            loss, state = _span_loss(model, span, state)
            if not np.isfinite(loss.item()):
                raise NumericError(f"{model.kind} baseline loss is non-finite", step=i, epoch=epoch)
            backward(loss)
            optimizer.step()
            state = model.detach(state)
            total += loss.item()

        val_loss = _span_loss(model, windows.val, state)[0].item()
        model.history.train_loss.append(total / len(windows.train))
        model.history.val_loss.append(val_loss)
        logger.debug("%s epoch %d train_mse=%.5f val_mse=%.5f", model.kind, epoch, total / len(windows.train), val_loss)
        if val_loss < best_loss:
            best_loss, best, since_best = val_loss, [p.value.copy() for p in model.parameters()], 0
            model.history.best_epoch = epoch
        else:
            since_best += 1
            if cfg.patience and since_best >= cfg.patience:
                break

    _restore(model, best)
    logger.info(
        "%s baseline fitted: %d epochs, best epoch %d (val mse %.5f)",
        model.kind.upper(),
        len(model.history.train_loss),
        model.history.best_epoch,
        best_loss,
    )
    return model


def fit_lstm_forecaster(windows: WindowedSeries, cfg: BaselineConfig) -> LstmForecaster:
    input_dim = windows.train[0].x.shape[1] if windows.train else 0
    if input_dim < 1:
        raise ContractError("Training span is empty")
    model = LstmForecaster(input_dim, cfg.lstm_hidden, np.random.default_rng(cfg.seed))
    return fit_recurrent(model, windows, cfg)


def fit_gru_forecaster(windows: WindowedSeries, cfg: BaselineConfig) -> GruForecaster:
    input_dim = windows.train[0].x.shape[1] if windows.train else 0
    if input_dim < 1:
        raise ContractError("Training span is empty")
    model = GruForecaster(input_dim, cfg.lstm_hidden, np.random.default_rng(cfg.seed))
    return fit_recurrent(model, windows, cfg)


def recurrent_condition(model: RecurrentForecaster, x_cond, state: Optional[State] = None) -> State:
    """Run the cell over the conditioning covariates from ``state`` (zeros if None)."""
    x = np.asarray(x_cond, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ContractError(f"Conditioning window must be a non-empty (rows, N) matrix, got {x.shape}")
    state = model.initial_state() if state is None else state
    for row in x:
        state = model.detach(model.advance(state, row))
    return state


def recurrent_forecast(model: RecurrentForecaster, state: State, x_future, horizon: Optional[int] = None) -> np.ndarray:
    """Roll a recurrent baseline over future covariates, emitting one prediction per step."""
    x = np.asarray(x_future, dtype=np.float64)
    horizon = len(x) if horizon is None else int(horizon)
    if horizon < 1:
        raise ContractError(f"horizon must be at least 1, got {horizon}")
    if x.ndim != 2 or len(x) < horizon:
        raise ContractError(f"Need {horizon} rows of future covariates, got shape {x.shape}")
    path = np.empty(horizon)
    for t in range(horizon):
        state = model.detach(model.advance(state, x[t]))
        path[t] = model.output(state).item()
    return path


lstm_forecast = recurrent_forecast
