"""Conditioning on recent history and Monte-Carlo multistep prediction.

Prediction rolls the generative model forward from the last conditioned
hidden state: at each step z_t is drawn from the prior, h_t is the stochastic
GRU update, and y_t is drawn from the emission. Sampled y_t are never fed
back; only h_t carries forward.

Typical usage:
    h_last = condition(theta, phi, cond.y, cond.x, rng=np.random.default_rng(0))
    result = predict(theta, h_last, pred.x, n_sims=500, rng=0, scaler=scaler)
    result.write_csv("forecast.csv")
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .autodiff import Tensor
from .data import Scaler
from .exceptions import ContractError, DimensionError
from .gaussian import reparameterize
from .model import GenerativeParams, InferenceParams, _as_covariates, elbo

logger = logging.getLogger(__name__)

DEFAULT_N_SIMS = 500
DEFAULT_LEVELS = (0.05, 0.5, 0.95)
CONDITION_LATENTS = ("posterior", "prior")

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


def level_name(level: float) -> str:
    """Column name of a quantile level, e.g. 0.05 -> 'q05'."""
    pct = level * 100.0
    if abs(pct - round(pct)) < 1e-9:
        return f"q{int(round(pct)):02d}"
    return "q" + f"{pct:g}".replace(".", "_")


def summarize(paths, levels: Sequence[float] = DEFAULT_LEVELS) -> Tuple[np.ndarray, Dict[float, np.ndarray]]:
    """Per-step mean and nearest-rank empirical quantiles of sample paths.

    Args:
        paths: Sample paths, shape (n_paths, horizon)
        levels: Quantile levels in (0, 1)

    Returns:
        Tuple of (mean path, {level: quantile path})

    Raises:
        ContractError: If there are no paths or they have unequal lengths
    """
    if isinstance(paths, np.ndarray):
        array = np.asarray(paths, dtype=np.float64)
    else:
        rows = [np.asarray(p, dtype=np.float64).reshape(-1) for p in paths]
        if len({len(r) for r in rows}) > 1:
            raise ContractError("Sample paths have unequal lengths")
        array = np.array(rows) if rows else np.empty((0, 0))
    if array.ndim != 2 or array.shape[0] == 0 or array.shape[1] == 0:
        raise ContractError(f"Need a non-empty (n_paths, horizon) array, got shape {array.shape}")

    n = array.shape[0]
    ordered = np.sort(array, axis=0)
    quantiles: Dict[float, np.ndarray] = {}
    for level in sorted(levels):
        if not 0.0 < level < 1.0:
            raise ContractError(f"Quantile level must lie in (0, 1), got {level}")
        rank = min(max(int(math.ceil(level * n)), 1), n)
        quantiles[float(level)] = ordered[rank - 1].copy()
    return array.mean(axis=0), quantiles


@dataclass
class ForecastResult:
    """Monte-Carlo forecast in original units.

    Attributes:
        paths: Sample paths, shape (n_sims, horizon)
        mean: Per-step mean of the paths (the point forecast)
        quantiles: {level: per-step quantile path}
        hidden_paths: Hidden states per simulation and step, when requested
    """
    paths: np.ndarray
    mean: np.ndarray
    quantiles: Dict[float, np.ndarray]
    hidden_paths: Optional[np.ndarray] = None

    @classmethod
    def from_paths(
        cls,
        paths: np.ndarray,
        levels: Sequence[float] = DEFAULT_LEVELS,
        hidden_paths: Optional[np.ndarray] = None,
    ) -> "ForecastResult":
        mean, quantiles = summarize(paths, levels)
        return cls(np.asarray(paths, dtype=np.float64), mean, quantiles, hidden_paths)

    @property
    def n_sims(self) -> int:
        return self.paths.shape[0]

    @property
    def horizon(self) -> int:
        return self.paths.shape[1]

    @property
    def levels(self) -> List[float]:
        return sorted(self.quantiles)

    def interval(self, lower: float = 0.05, upper: float = 0.95) -> Tuple[np.ndarray, np.ndarray]:
        """Quantile band; falls back to the outermost available levels."""
        lo = self.quantiles.get(lower, self.quantiles[self.levels[0]])
        hi = self.quantiles.get(upper, self.quantiles[self.levels[-1]])
        return lo, hi

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame({"step": np.arange(1, self.horizon + 1), "mean": self.mean})
        for level in self.levels:
            frame[level_name(level)] = self.quantiles[level]
        return frame

    def paths_frame(self) -> pd.DataFrame:
        columns = {"step": np.arange(1, self.horizon + 1)}
        for i in range(self.n_sims):
            columns[f"path_{i}"] = self.paths[i]
        return pd.DataFrame(columns)

    def write_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.to_frame().to_csv(path, index=False)
        return path

    def write_paths_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        self.paths_frame().to_csv(path, index=False)
        return path


def write_point_forecast_csv(mean, path: Union[str, Path]) -> Path:
    """Mean-only forecast export (used for the baselines)."""
    path = Path(path)
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    pd.DataFrame({"step": np.arange(1, len(mean) + 1), "mean": mean}).to_csv(path, index=False)
    return path


def _seed_sequence(rng: SeedLike) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, np.random.Generator):
        return np.random.SeedSequence(int(rng.integers(0, 2**63 - 1)))
    return np.random.SeedSequence(rng)


def condition(
    theta: GenerativeParams,
    phi: InferenceParams,
    y_cond,
    x_cond,
    h_init=None,
    g_init=None,
    rng: Optional[np.random.Generator] = None,
    latent: str = "posterior",
) -> np.ndarray:
    """Roll the model over the conditioning window and return h_last.

    With ``latent="posterior"`` z_t comes from the inference network over the
    observed targets, exactly as in the ELBO. With ``latent="prior"`` z_t is
    drawn from p(z_t | h_{t-1}) and the targets are not consulted.

    Raises:
        ContractError: Empty window, mismatched lengths, unknown latent mode
    """
    if latent not in CONDITION_LATENTS:
        raise ContractError(f"latent must be one of {CONDITION_LATENTS}, got {latent!r}")
    y = np.asarray(y_cond, dtype=np.float64).reshape(-1)
    x = _as_covariates(x_cond, theta.input_dim)
    if len(y) < 1 or len(y) != x.shape[0]:
        raise ContractError(f"Conditioning window needs equal lengths >= 1, got {len(y)} and {x.shape[0]}")
    if rng is None:
        rng = np.random.default_rng()

    if latent == "posterior":
        return elbo(theta, phi, y, x, h_init, g_init, rng=rng).h_last.value.copy()

    h = Tensor(np.zeros(theta.hidden_dim)) if h_init is None else Tensor(h_init)
    for t in range(len(y)):
        z = reparameterize(theta.prior_z(h), rng.standard_normal(theta.latent_dim))
        h = Tensor(theta.transition(h, x[t], z).value)
    return h.value.copy()


def predict(
    theta: GenerativeParams,
    h_last,
    x_future,
    n_sims: int = DEFAULT_N_SIMS,
    rng: SeedLike = None,
    scaler: Optional[Scaler] = None,
    levels: Sequence[float] = DEFAULT_LEVELS,
    sample_latent: bool = True,
    sample_emission: bool = True,
    keep_states: bool = False,
) -> ForecastResult:
    """Autoregressive Monte-Carlo prediction over the covariates of the horizon.

    Each simulation draws from its own random streams (one for z, one for the
    emission) spawned from ``rng``, so a simulation's path depends only on its
    index and the root seed. All simulations are evaluated as columns of one
    batch.

    Args:
        theta: Generative parameters
        h_last: Hidden state after conditioning
        x_future: Covariates of the prediction steps, shape (tau, N)
        n_sims: Number of simulations
        rng: Root seed (int, SeedSequence or Generator)
        scaler: If given, paths are mapped back to original units
        levels: Quantile levels to summarise
        sample_latent: Draw z_t (False uses the prior mean)
        sample_emission: Draw y_t (False uses the emission mean)
        keep_states: Store hidden states in ``ForecastResult.hidden_paths``

    Raises:
        ContractError: If n_sims < 1 or the horizon is empty
        DimensionError: If covariate or state dimensions do not match the cell
    """
    if int(n_sims) < 1:
        raise ContractError(f"n_sims must be at least 1, got {n_sims}")
    x = _as_covariates(x_future, theta.input_dim)
    horizon = x.shape[0]
    if horizon < 1:
        raise ContractError("Prediction horizon must be at least one step")
    h0 = np.asarray(h_last, dtype=np.float64).reshape(-1)
    if h0.shape != (theta.hidden_dim,):
        raise DimensionError("predict", [h0.shape], f"expected hidden dim {theta.hidden_dim}")

    streams = [seq.spawn(2) for seq in _seed_sequence(rng).spawn(n_sims)]
    latent_noise = np.stack(
        [np.random.default_rng(s[0]).standard_normal((horizon, theta.latent_dim)) for s in streams]
    )
    emission_noise = np.stack([np.random.default_rng(s[1]).standard_normal(horizon) for s in streams])

    h = Tensor(np.repeat(h0[:, None], n_sims, axis=1))
    paths = np.empty((n_sims, horizon))
    hidden = np.empty((n_sims, horizon, theta.hidden_dim)) if keep_states else None
    for t in range(horizon):
        prior = theta.prior_z(h)
        z = prior.mean.value + (prior.scale.value * latent_noise[:, t, :].T if sample_latent else 0.0)
        x_t = np.repeat(x[t][:, None], n_sims, axis=1)
        h = Tensor(theta.transition(h, x_t, z).value)
        emission = theta.emission(h)
        y = emission.mean.value[0]
        if sample_emission:
            y = y + emission.scale.value[0] * emission_noise[:, t]
        paths[:, t] = y
        if hidden is not None:
            hidden[:, t, :] = h.value.T

    if scaler is not None:
        paths = scaler.inverse_y(paths)
    logger.debug("Simulated %d paths over %d steps", n_sims, horizon)
    return ForecastResult.from_paths(paths, levels, hidden)
