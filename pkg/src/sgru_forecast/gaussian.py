"""Diagonal-Gaussian distribution algebra over autodiff tensors."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor, as_tensor, log, square, sum_all
from .exceptions import ContractError, DimensionError

HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class GaussianDiag:
    """Gaussian with diagonal covariance diag(scale**2).

    Attributes:
        mean: Mean vector (or column-batched matrix)
        scale: Per-dimension standard deviation, same shape as mean
    """
    mean: Tensor
    scale: Tensor

    def __post_init__(self) -> None:
        self.mean = as_tensor(self.mean)
        self.scale = as_tensor(self.scale)
        if self.mean.shape != self.scale.shape:
            raise DimensionError("gaussian", [self.mean.shape, self.scale.shape])
        if not np.all(np.isfinite(self.scale.value)) or np.any(self.scale.value <= 0.0):
            raise ContractError("Gaussian scale must be strictly positive and finite")

    @classmethod
    def from_arrays(cls, mean, scale) -> "GaussianDiag":
        return cls(Tensor(mean), Tensor(scale))

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def _check_dims(op: str, a, b) -> None:
    if a.shape != b.shape:
        raise DimensionError(op, [a.shape, b.shape])


def reparameterize(d: GaussianDiag, eps) -> Tensor:
    """Differentiable sample ``mean + scale * eps``; gradients reach mean and scale only."""
    noise = Tensor(eps)
    _check_dims("reparameterize", d.mean, noise)
    return d.mean + d.scale * noise


def log_density(d: GaussianDiag, value) -> Tensor:
    """Log-density summed over dimensions, as a length-1 tensor."""
    value = as_tensor(value)
    _check_dims("log_density", d.mean, value)
    n = d.mean.value.size
    quad = square(value - d.mean) / (2.0 * square(d.scale))
    return -(sum_all(log(d.scale)) + sum_all(quad)) - n * HALF_LOG_2PI


def kl_diag(q: GaussianDiag, p: GaussianDiag) -> Tensor:
    """Analytic KL(q || p) between diagonal Gaussians, as a length-1 tensor."""
    _check_dims("kl_diag", q.mean, p.mean)
    ratio = (square(q.scale) + square(q.mean - p.mean)) / (2.0 * square(p.scale))
    per_dim = log(p.scale) - log(q.scale) + ratio - 0.5
    return sum_all(per_dim)
