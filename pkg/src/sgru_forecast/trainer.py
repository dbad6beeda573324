"""Joint SGVB optimisation of the generative and inference parameters.

Typical usage:
    from sgru_forecast.trainer import TrainConfig, train

    theta, phi, report = train(windows, TrainConfig(latent_dim=4, hidden_dim=16, g_dim=16))
    print(report.best_epoch, report.val_elbo[-1])
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .autodiff import Tensor, backward
from .data import Span, WindowedSeries
from .exceptions import ConfigError, ContractError, DimensionError, NumericError
from .layers import ACTIVATIONS
from .model import GenerativeParams, InferenceParams, build_model, elbo

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    """Model dimensions and optimisation settings.

    The MLP specs are (hidden layers, width). ``posterior_mlp`` defaults to
    ``prior_mlp``. Row counts and the sequence length live on SplitPlan.
    """
    latent_dim: int = 50
    hidden_dim: int = 64
    g_dim: int = 64
    prior_mlp: Tuple[int, int] = (4, 64)
    emission_mlp: Tuple[int, int] = (4, 64)
    posterior_mlp: Optional[Tuple[int, int]] = None
    activation: str = "tanh"
    epochs: int = 300
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 30
    clip_norm: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        self.prior_mlp = tuple(int(v) for v in self.prior_mlp)
        self.emission_mlp = tuple(int(v) for v in self.emission_mlp)
        if self.posterior_mlp is None:
            self.posterior_mlp = self.prior_mlp
        self.posterior_mlp = tuple(int(v) for v in self.posterior_mlp)
        self.validate()

    def validate(self) -> None:
        for name in ("latent_dim", "hidden_dim", "g_dim", "epochs"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"must be positive, got {getattr(self, name)}", field=f"model.{name}")
        for name in ("prior_mlp", "emission_mlp", "posterior_mlp"):
            spec = getattr(self, name)
            if len(spec) != 2 or spec[0] < 0 or spec[1] < 1:
                raise ConfigError(f"expected (layers >= 0, width >= 1), got {spec}", field=f"model.{name}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}", field="model.activation")
        if self.learning_rate < 0:
            raise ConfigError(f"must be non-negative, got {self.learning_rate}", field="training.learning_rate")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("Adam betas must lie in [0, 1)", field="training.beta1")
        if self.patience < 0:
            raise ConfigError(f"must be non-negative, got {self.patience}", field="training.patience")
        if self.clip_norm <= 0:
            raise ConfigError(f"must be positive, got {self.clip_norm}", field="training.clip_norm")

    def dims(self) -> Dict[str, int]:
        return {"latent_dim": self.latent_dim, "hidden_dim": self.hidden_dim, "g_dim": self.g_dim}

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        for name in ("prior_mlp", "emission_mlp", "posterior_mlp"):
            data[name] = list(data[name])
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in known})


@dataclass
class AdamState:
    """Moment accumulators and hyperparameters of Adam."""
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[Tensor], **hyper) -> "AdamState":
        state = cls(**hyper)
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
        return state


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState) -> AdamState:
    """One bias-corrected Adam update applied to ``params`` in place.

    Raises:
        DimensionError: If parameters, gradients and moments do not align
        NumericError: If any gradient is non-finite (nothing is updated)
    """
    if len(params) != len(grads):
        raise DimensionError("adam_step", [(len(params),), (len(grads),)], "parameter/gradient count")
    if not state.m:
        state.m = [np.zeros_like(p.value) for p in params]
        state.v = [np.zeros_like(p.value) for p in params]
    if len(state.m) != len(params):
        raise DimensionError("adam_step", [(len(params),), (len(state.m),)], "parameter/moment count")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != np.shape(g) or p.shape != m.shape:
            raise DimensionError("adam_step", [p.shape, np.shape(g), m.shape])
        if not np.all(np.isfinite(g)):
            raise NumericError("Non-finite gradient passed to Adam")

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p.value -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return state


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> Tuple[List[np.ndarray], float]:
    """Rescale gradients so their global L2 norm is at most ``max_norm``."""
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        factor = max_norm / norm
        return [g * factor for g in grads], norm
    return list(grads), norm


class Adam:
    """Adam over a fixed parameter list, reading gradients from ``Tensor.grad``."""

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        clip_norm: Optional[float] = None,
    ) -> None:
        self.params = list(params)
        self.clip_norm = clip_norm
        self.state = AdamState.for_params(self.params, lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> float:
        """Apply one update; returns the pre-clipping gradient norm."""
        grads = [p.grad for p in self.params]
        if self.clip_norm is not None:
            grads, norm = clip_grad_norm(grads, self.clip_norm)
        else:
            norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
        adam_step(self.params, grads, self.state)
        return norm


@dataclass
class TrainReport:
    """Per-epoch ELBO history (per time step averages).

    Attributes:
        train_elbo: Mean training ELBO per step for each epoch
        val_elbo: Validation ELBO per step for each epoch
        best_epoch: 1-based epoch whose parameters were kept
        stopped_early: Whether patience ran out before ``epochs``
        wall_time: Seconds spent training (not part of equality)
    """
    train_elbo: List[float] = field(default_factory=list)
    val_elbo: List[float] = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False
    wall_time: float = field(default=0.0, compare=False)

    @property
    def epochs_run(self) -> int:
        return len(self.train_elbo)

    @property
    def best_val_elbo(self) -> float:
        return self.val_elbo[self.best_epoch - 1] if self.best_epoch else float("-inf")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "epoch": np.arange(1, self.epochs_run + 1),
                "train_elbo": self.train_elbo,
                "val_elbo": self.val_elbo,
            }
        )


def write_training_log(report: TrainReport, path: Union[str, Path]) -> Path:
    """Write ``epoch,train_elbo,val_elbo`` rows as CSV."""
    path = Path(path)
    report.to_frame().to_csv(path, index=False)
    return path


def span_elbo(
    theta: GenerativeParams,
    phi: InferenceParams,
    span: Span,
    h_init=None,
    g_init=None,
    rng: Optional[np.random.Generator] = None,
) -> float:
    """ELBO per time step of one span, without parameter updates."""
    if span.y is None:
        raise ContractError(f"Span [{span.start}, {span.stop}) has no observed targets")
    breakdown = elbo(theta, phi, span.y, span.x, h_init, g_init, rng=rng)
    return breakdown.value / len(span)


def train(
    windows: WindowedSeries,
    cfg: TrainConfig,
    seed: Optional[int] = None,
) -> Tuple[GenerativeParams, InferenceParams, TrainReport]:
    """Maximise the ELBO over the training subsequences with Adam.

    Subsequences are visited in temporal order; the final (h, g) of each seeds
    the next one, detached from the tape. One optimiser step is taken per
    subsequence. Parameters of the best validation epoch are returned.

    Raises:
        ContractError: If there are no training subsequences
        NumericError: If the loss or a gradient becomes non-finite
    """
    if not windows.train:
        raise ContractError("Training span is empty")
    seed = cfg.seed if seed is None else seed
    init_seq, noise_seq, val_seq = np.random.SeedSequence(seed).spawn(3)
    input_dim = windows.train[0].x.shape[1]

    theta, phi = build_model(input_dim, cfg, np.random.default_rng(init_seq))
    params = theta.parameters() + phi.parameters()
    optimizer = Adam(
        params,
        lr=cfg.learning_rate,
        beta1=cfg.beta1,
        beta2=cfg.beta2,
        eps=cfg.adam_eps,
        clip_norm=cfg.clip_norm,
    )
    noise_rng = np.random.default_rng(noise_seq)
    n_train_steps = sum(len(s) for s in windows.train)

    report = TrainReport()
    best_values: Optional[List[np.ndarray]] = None
    since_best = 0
    started = time.perf_counter()

    for epoch in range(1, cfg.epochs + 1):
        h = g = None
        total = 0.0
        for i, span in enumerate(windows.train):
            optimizer.zero_grad()
            try:
                breakdown = elbo(theta, phi, span.y, span.x, h, g, rng=noise_rng)
                backward(-breakdown.total)
                optimizer.step()
            except NumericError as exc:
                raise NumericError(f"Training diverged: {exc}", step=i, epoch=epoch) from exc
            h, g = breakdown.h_last.detach(), breakdown.g_last.detach()
            total += breakdown.value

        train_value = total / n_train_steps
        val_value = span_elbo(theta, phi, windows.val, h, g, rng=np.random.default_rng(val_seq))
        report.train_elbo.append(train_value)
        report.val_elbo.append(val_value)
        logger.info("epoch %d train_elbo=%.5f val_elbo=%.5f", epoch, train_value, val_value)

        if not np.isfinite(val_value):
            raise NumericError("Non-finite validation ELBO", epoch=epoch)
        if report.best_epoch == 0 or val_value > report.best_val_elbo:
            report.best_epoch = epoch
            best_values = [p.value.copy() for p in params]
            since_best = 0
        else:
            since_best += 1
            if cfg.patience and since_best >= cfg.patience:
                report.stopped_early = True
                logger.info("Early stop at epoch %d (best epoch %d)", epoch, report.best_epoch)
                break

    if best_values is not None:
        for p, value in zip(params, best_values):
            p.value[...] = value
        logger.info("Restored parameters of epoch %d (val_elbo=%.5f)", report.best_epoch, report.best_val_elbo)
    report.wall_time = time.perf_counter() - started
    return theta, phi, report
