"""Generative and inference networks of the stochastic GRU and the sequence ELBO.

Generative model (theta):
    z_t ~ N(mu(h_{t-1}), diag(sigma(h_{t-1})^2))     prior head
    h_t = StochasticGRU(h_{t-1}, x_t, z_t)            transition
    y_t ~ N(mu(h_t), sigma(h_t)^2)                    emission head

Inference model (phi):
    g_t = GRU(g_{t-1}, y_t)
    z_t ~ q(z_t | y_{1:t}) = N(mu(g_t), diag(sigma(g_t)^2))

The posterior h-transition reuses the generative cell: given z_t the GRU
update is deterministic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Optional, Tuple

import numpy as np

from .autodiff import Tensor, as_tensor, check_finite, slice_rows, softplus
from .exceptions import ContractError, DimensionError, NumericError
from .gaussian import GaussianDiag, kl_diag, log_density, reparameterize
from .layers import MLP, DeterministicGRUCell, Module, StochasticGRUCell

if TYPE_CHECKING:
    from .trainer import TrainConfig

logger = logging.getLogger(__name__)

SCALE_FLOOR = 1e-4


class GaussianHead(Module):
    """MLP mapping a state to a diagonal Gaussian: identity mean, softplus + floor scale."""

    def __init__(
        self,
        input_dim: int,
        output_dim: int,
        hidden_layers: int,
        width: int,
        activation: str = "tanh",
        rng: Optional[np.random.Generator] = None,
        name: str = "gaussian_head",
    ) -> None:
        self.name = name
        self.output_dim = int(output_dim)
        self.mlp = MLP(input_dim, 2 * output_dim, hidden_layers, width, activation, "identity", rng)

    def __call__(self, state) -> GaussianDiag:
        state = as_tensor(state)
        if state.shape[0] != self.mlp.input_dim:
            raise DimensionError(self.name, [state.shape], f"expected input dim {self.mlp.input_dim}")
        out = self.mlp.forward(state)
        check_finite(out, f"{self.name} output")
        k = self.output_dim
        mean = slice_rows(out, 0, k)
        scale = softplus(slice_rows(out, k, 2 * k)) + SCALE_FLOOR
        return GaussianDiag(mean, scale)


class GenerativeParams(Module):
    """theta: prior head (theta_3), stochastic GRU cell (theta_2), emission head (theta_1)."""

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int,
        latent_dim: int,
        prior_mlp: Tuple[int, int] = (1, 16),
        emission_mlp: Tuple[int, int] = (1, 16),
        activation: str = "tanh",
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.prior_head = GaussianHead(hidden_dim, latent_dim, *prior_mlp, activation, rng, "prior_z")
        self.cell = StochasticGRUCell(input_dim, hidden_dim, latent_dim, rng)
        self.emission_head = GaussianHead(hidden_dim, 1, *emission_mlp, activation, rng, "emission")

    @property
    def input_dim(self) -> int:
        return self.cell.input_dim

    @property
    def hidden_dim(self) -> int:
        return self.cell.hidden_dim

    @property
    def latent_dim(self) -> int:
        return self.cell.latent_dim

    def prior_z(self, h_prev) -> GaussianDiag:
        """p(z_t | h_{t-1})."""
        return self.prior_head(h_prev)

    def transition(self, h_prev, x, z) -> Tensor:
        return self.cell.step(h_prev, x, z)

    def emission(self, h_t) -> GaussianDiag:
        """p(y_t | h_t), a scalar Gaussian."""
        return self.emission_head(h_t)


class InferenceParams(Module):
    """phi: GRU over observed targets (state g_t) and the posterior head."""

    def __init__(
        self,
        g_dim: int,
        latent_dim: int,
        posterior_mlp: Tuple[int, int] = (1, 16),
        activation: str = "tanh",
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        self.gru = DeterministicGRUCell(1, g_dim, rng)
        self.posterior_head = GaussianHead(g_dim, latent_dim, *posterior_mlp, activation, rng, "posterior_z")

    @property
    def g_dim(self) -> int:
        return self.gru.hidden_dim

    def step(self, g_prev, y_t) -> Tensor:
        """g_t = GRU(g_{t-1}, y_t)."""
        y = np.asarray(y_t, dtype=np.float64).reshape(-1)
        if y.size != 1:
            raise DimensionError("inference_step", [y.shape], "target must be a scalar")
        if not np.isfinite(y[0]):
            raise NumericError("Non-finite target fed to the inference GRU")
        return self.gru.step(g_prev, Tensor(y))

    def posterior_z(self, g_t) -> GaussianDiag:
        """q(z_t | y_{1:t})."""
        return self.posterior_head(g_t)


@dataclass
class ElboBreakdown:
    """Per-sequence ELBO with its per-step components.

    Attributes:
        total: Differentiable ELBO (sum of recon minus sum of KL)
        recon: Per-step log p(y_t | h_t)
        kl: Per-step KL(q(z_t) || p(z_t | h_{t-1}))
        h_last: Final generative state h_L
        g_last: Final inference state g_L
    """
    total: Tensor
    recon: np.ndarray
    kl: np.ndarray
    h_last: Tensor
    g_last: Tensor

    @property
    def value(self) -> float:
        return self.total.item()

    @property
    def steps(self) -> int:
        return len(self.recon)


def _as_covariates(x_seq, input_dim: int) -> np.ndarray:
    x = np.asarray(x_seq, dtype=np.float64)
    if x.ndim == 1 and input_dim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[1] != input_dim:
        raise DimensionError("covariates", [x.shape], f"expected (L, {input_dim})")
    return x


def _initial_state(state, dim: int) -> Tensor:
    if state is None:
        return Tensor(np.zeros(dim))
    return as_tensor(state)


def elbo(
    theta: GenerativeParams,
    phi: InferenceParams,
    y_seq,
    x_seq,
    h_init=None,
    g_init=None,
    rng: Optional[np.random.Generator] = None,
    noise: Optional[np.ndarray] = None,
) -> ElboBreakdown:
    """Single-sample SGVB estimate of the ELBO for one subsequence.

    Args:
        theta: Generative parameters
        phi: Inference parameters
        y_seq: Observed targets, length L >= 1
        x_seq: Covariates, shape (L, N)
        h_init: Generative state before the first step (zeros if None)
        g_init: Inference state before the first step (zeros if None)
        rng: Source of the reparameterisation noise
        noise: Frozen noise of shape (L, latent); overrides ``rng``

    Returns:
        ElboBreakdown with the differentiable total and final states

    Raises:
        ContractError: If lengths disagree or no noise source is given
        NumericError: If an intermediate value is non-finite
    """
    y = np.asarray(y_seq, dtype=np.float64).reshape(-1)
    x = _as_covariates(x_seq, theta.input_dim)
    length = len(y)
    if length < 1 or x.shape[0] != length:
        raise ContractError(f"Targets and covariates must share a length >= 1, got {length} and {x.shape[0]}")

    if noise is None:
        if rng is None:
            raise ContractError("elbo needs either rng or frozen noise")
        noise = rng.standard_normal((length, theta.latent_dim))
    else:
        noise = np.asarray(noise, dtype=np.float64)
        if noise.shape != (length, theta.latent_dim):
            raise DimensionError("elbo noise", [noise.shape], f"expected ({length}, {theta.latent_dim})")

    h = _initial_state(h_init, theta.hidden_dim)
    g = _initial_state(g_init, phi.g_dim)

    recon_terms = np.empty(length)
    kl_terms = np.empty(length)
    recon_sum: Optional[Tensor] = None
    kl_sum: Optional[Tensor] = None

    for t in range(length):
        g = phi.step(g, y[t])
        q = phi.posterior_z(g)
        z = reparameterize(q, noise[t])
        p = theta.prior_z(h)
        h = theta.transition(h, x[t], z)
        check_finite(h, "hidden state", step=t)

        recon_t = log_density(theta.emission(h), [y[t]])
        kl_t = kl_diag(q, p)
        check_finite(recon_t, "reconstruction term", step=t)
        check_finite(kl_t, "KL term", step=t)
        recon_terms[t] = recon_t.item()
        kl_terms[t] = kl_t.item()
        recon_sum = recon_t if recon_sum is None else recon_sum + recon_t
        kl_sum = kl_t if kl_sum is None else kl_sum + kl_t

    return ElboBreakdown(recon_sum - kl_sum, recon_terms, kl_terms, h, g)


def model_dims(theta: GenerativeParams, phi: InferenceParams) -> Dict[str, int]:
    return {
        "input_dim": theta.input_dim,
        "latent_dim": theta.latent_dim,
        "hidden_dim": theta.hidden_dim,
        "g_dim": phi.g_dim,
    }


def build_model(
    input_dim: int,
    cfg: "TrainConfig",
    rng: Optional[np.random.Generator] = None,
) -> Tuple[GenerativeParams, InferenceParams]:
    """Construct (theta, phi) with the dimensions of a TrainConfig."""
    theta = GenerativeParams(
        input_dim,
        cfg.hidden_dim,
        cfg.latent_dim,
        prior_mlp=tuple(cfg.prior_mlp),
        emission_mlp=tuple(cfg.emission_mlp),
        activation=cfg.activation,
        rng=rng,
    )
    phi = InferenceParams(
        cfg.g_dim,
        cfg.latent_dim,
        posterior_mlp=tuple(cfg.posterior_mlp),
        activation=cfg.activation,
        rng=rng,
    )
    logger.debug(
        "Built stochastic GRU with %d generative and %d inference parameters",
        theta.num_parameters(),
        phi.num_parameters(),
    )
    return theta, phi
