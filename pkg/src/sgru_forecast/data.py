"""CSV ingestion, standardisation and the train/val/cond/pred windowing protocol."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .exceptions import ConfigError, ContractError, SchemaError, SizingError

logger = logging.getLogger(__name__)

MIN_STD = 1e-12


@dataclass
class SeriesDataset:
    """Aligned covariates and target.

    Attributes:
        x: Covariates, shape (rows, N); rows = T + tau
        y: Target, length T <= rows; rows beyond T form the prediction period
        covariate_names: Column names of x
        target_name: Column name of y
        timestamps: Optional per-row labels (metadata only)
    """
    x: np.ndarray
    y: np.ndarray
    covariate_names: List[str]
    target_name: str
    timestamps: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64).reshape(-1)
        if self.x.ndim != 2 or self.x.shape[1] != len(self.covariate_names):
            raise SchemaError(f"Covariate matrix shape {self.x.shape} does not match {len(self.covariate_names)} columns")
        if len(self.y) > len(self.x):
            raise SchemaError("Target is longer than the covariates")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise SchemaError("Dataset contains missing or non-finite values")

    @property
    def n_rows(self) -> int:
        return self.x.shape[0]

    @property
    def n_targets(self) -> int:
        return len(self.y)

    @property
    def n_covariates(self) -> int:
        return self.x.shape[1]

    @property
    def horizon(self) -> int:
        """Rows with covariates but no target."""
        return self.n_rows - self.n_targets


def load_csv(
    path: Union[str, Path],
    target: str,
    covariates: Sequence[str],
    timestamp: Optional[str] = None,
) -> SeriesDataset:
    """Load a comma-separated UTF-8 file with a header row.

    Blank cells are forward-filled; the first row must be complete. Trailing
    rows whose target is blank are kept as the prediction period.

    Raises:
        FileNotFoundError: If the file does not exist
        SchemaError: Missing column, non-numeric cell, empty file, incomplete first row
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")
    try:
        frame = pd.read_csv(path, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise SchemaError(f"Empty dataset file: {path}")
    if frame.empty:
        raise SchemaError(f"Dataset has a header but no rows: {path}")

    covariates = list(covariates)
    if not covariates:
        raise SchemaError("At least one covariate column is required")
    for column in [target] + covariates + ([timestamp] if timestamp else []):
        if column not in frame.columns:
            raise SchemaError(f"Column not found in {path.name}: {column!r}", column=column)

    numeric = pd.DataFrame(index=frame.index)
    for column in [target] + covariates:
        raw = frame[column]
        converted = pd.to_numeric(raw, errors="coerce")
        bad = converted.isna() & raw.notna()
        if bad.any():
            row = int(np.flatnonzero(bad.to_numpy())[0])
            raise SchemaError(
                f"Non-numeric value {raw.iloc[row]!r} in column {column!r} at data row {row + 1}",
                column=column,
            )
        numeric[column] = converted

    first = numeric.iloc[0]
    if first.isna().any():
        blank = [c for c in numeric.columns if pd.isna(first[c])]
        raise SchemaError(f"First row is incomplete (blank: {', '.join(blank)})", column=blank[0])

    last_target = int(np.flatnonzero(numeric[target].notna().to_numpy())[-1])
    filled = numeric.ffill()
    n_filled = int(numeric[covariates].isna().sum().sum() + numeric[target].iloc[: last_target + 1].isna().sum())
    if n_filled:
        logger.info("Forward-filled %d blank cells in %s", n_filled, path.name)

    timestamps = frame[timestamp].astype(str).to_numpy() if timestamp else None
    return SeriesDataset(
        x=filled[covariates].to_numpy(dtype=np.float64),
        y=filled[target].iloc[: last_target + 1].to_numpy(dtype=np.float64),
        covariate_names=covariates,
        target_name=target,
        timestamps=timestamps,
    )


@dataclass
class Scaler:
    """Per-column z-score statistics of the training span."""
    columns: List[str]
    mean: np.ndarray
    std: np.ndarray
    target_mean: float
    target_std: float

    def transform_x(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def transform_y(self, y) -> np.ndarray:
        return (np.asarray(y, dtype=np.float64) - self.target_mean) / self.target_std

    def inverse_y(self, values) -> np.ndarray:
        return np.asarray(values, dtype=np.float64) * self.target_std + self.target_mean

    def to_dict(self) -> Dict[str, Any]:
        return {
            "columns": list(self.columns),
            "mean": [float(v) for v in self.mean],
            "std": [float(v) for v in self.std],
            "target_mean": float(self.target_mean),
            "target_std": float(self.target_std),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Scaler":
        return cls(
            columns=list(data["columns"]),
            mean=np.asarray(data["mean"], dtype=np.float64),
            std=np.asarray(data["std"], dtype=np.float64),
            target_mean=float(data["target_mean"]),
            target_std=float(data["target_std"]),
        )


def standardize(ds: SeriesDataset, train_span: slice):
    """Z-score covariates and target with statistics of ``train_span`` only.

    Returns:
        Tuple of (scaled dataset, Scaler)

    Raises:
        ContractError: If the training span is empty
        ConfigError: If a column is constant over the training span
    """
    x_train = ds.x[train_span]
    y_train = ds.y[train_span]
    if len(x_train) == 0 or len(y_train) == 0:
        raise ContractError("Training span for standardisation is empty")

    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    for name, s in zip(ds.covariate_names, std):
        if s < MIN_STD:
            raise ConfigError(
                f"Covariate {name!r} is constant over the training span; exclude it from data.covariates",
                field="data.covariates",
            )
    target_std = float(y_train.std())
    if target_std < MIN_STD:
        raise ConfigError(
            f"Target {ds.target_name!r} is constant over the training span",
            field="data.target",
        )

    scaler = Scaler(list(ds.covariate_names), mean, std, float(y_train.mean()), target_std)
    scaled = replace(ds, x=scaler.transform_x(ds.x), y=scaler.transform_y(ds.y))
    return scaled, scaler


def inverse_transform(scaler: Scaler, values) -> np.ndarray:
    """Map scaled target values back to original units."""
    return scaler.inverse_y(values)


@dataclass
class SplitPlan:
    """Row budget of one experiment.

    Attributes:
        n_train: Training rows (cut into non-overlapping subsequences)
        n_val: Validation rows
        n_cond: Conditioning rows immediately before the forecast
        seq_len: Training subsequence length
        n_pred: Prediction steps (tau)
        offset: First row used (rows before it are ignored)
    """
    n_train: int
    n_val: int
    n_cond: int
    seq_len: int
    n_pred: int = 30
    offset: int = 0

    def __post_init__(self) -> None:
        for name in ("n_train", "n_val", "n_cond", "seq_len", "n_pred"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"must be positive, got {getattr(self, name)}", field=f"split.{name}")
        if self.offset < 0:
            raise ConfigError(f"must be non-negative, got {self.offset}", field="split.offset")
        if self.seq_len > self.n_train:
            raise ConfigError(
                f"sequence length {self.seq_len} exceeds training rows {self.n_train}",
                field="split.seq_len",
            )

    @property
    def n_sequences(self) -> int:
        return self.n_train // self.seq_len

    @property
    def history_rows(self) -> int:
        """Rows that need an observed target."""
        return self.offset + self.n_train + self.n_val + self.n_cond

    @property
    def rows_required(self) -> int:
        return self.history_rows + self.n_pred

    @property
    def train_span(self) -> slice:
        return slice(self.offset, self.offset + self.n_train)


@dataclass
class Span:
    """Contiguous rows [start, stop) with covariates and (optionally) targets."""
    start: int
    stop: int
    x: np.ndarray
    y: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return self.stop - self.start

    @property
    def indices(self) -> range:
        return range(self.start, self.stop)


@dataclass
class WindowedSeries:
    """Output of :func:`window`: ordered training subsequences then val/cond/pred spans.

    The prediction span carries held-out targets only when the dataset has them;
    models never see them.
    """
    train: List[Span]
    val: Span
    cond: Span
    pred: Span
    dropped: range = field(default_factory=lambda: range(0))

    @property
    def horizon(self) -> int:
        return len(self.pred)

    def history_y(self) -> np.ndarray:
        """Targets of every span before the forecast, in order (dropped rows skipped)."""
        parts = [s.y for s in self.train] + [self.val.y, self.cond.y]
        return np.concatenate(parts)


def _span(ds: SeriesDataset, start: int, stop: int) -> Span:
    y = ds.y[start:stop].copy() if ds.n_targets >= stop else None
    return Span(start, stop, ds.x[start:stop].copy(), y)


def window(ds: SeriesDataset, plan: SplitPlan) -> WindowedSeries:
    """Partition rows into training subsequences and the val/cond/pred spans.

    The training span is cut into floor(n_train / seq_len) consecutive
    subsequences; the remainder at its tail is dropped.

    Raises:
        SizingError: If the plan needs more rows than available
    """
    if ds.n_rows < plan.rows_required:
        raise SizingError("Split plan does not fit the covariates", plan.rows_required, ds.n_rows)
    if ds.n_targets < plan.history_rows:
        raise SizingError("Split plan does not fit the observed targets", plan.history_rows, ds.n_targets)

    o, L = plan.offset, plan.seq_len
    train = [_span(ds, o + i * L, o + (i + 1) * L) for i in range(plan.n_sequences)]
    dropped = range(o + plan.n_sequences * L, o + plan.n_train)
    if len(dropped):
        logger.debug("Dropping %d remainder rows from the training span", len(dropped))

    val_start = o + plan.n_train
    cond_start = val_start + plan.n_val
    pred_start = cond_start + plan.n_cond
    return WindowedSeries(
        train=train,
        val=_span(ds, val_start, cond_start),
        cond=_span(ds, cond_start, pred_start),
        pred=_span(ds, pred_start, pred_start + plan.n_pred),
        dropped=dropped,
    )


def make_synthetic(
    n_rows: int = 1250,
    seed: int = 0,
    period: float = 24.0,
    noise_scale: float = 0.3,
    ar_coef: float = 0.8,
) -> SeriesDataset:
    """Noisy sine with phase covariates.

    y_t = sin(2 pi t / period) + noise_scale * e_t, where e_t is a unit-variance
    AR(1) process with coefficient ``ar_coef``; x_t = (sin, cos) of the phase.
    """
    if n_rows < 1:
        raise ContractError(f"n_rows must be positive, got {n_rows}")
    if not -1.0 < ar_coef < 1.0:
        raise ContractError(f"ar_coef must lie in (-1, 1), got {ar_coef}")
    rng = np.random.default_rng(seed)
    t = np.arange(n_rows, dtype=np.float64)
    phase = 2.0 * np.pi * t / period
    shocks = rng.standard_normal(n_rows) * np.sqrt(1.0 - ar_coef ** 2)
    noise = np.empty(n_rows)
    noise[0] = rng.standard_normal()
    for i in range(1, n_rows):
        noise[i] = ar_coef * noise[i - 1] + shocks[i]
    return SeriesDataset(
        x=np.column_stack([np.sin(phase), np.cos(phase)]),
        y=np.sin(phase) + noise_scale * noise,
        covariate_names=["phase_sin", "phase_cos"],
        target_name="y",
    )
