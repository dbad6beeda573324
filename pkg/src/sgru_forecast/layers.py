"""Neural building blocks expressed through the autodiff engine.

Provides:
- Module: parameter bookkeeping shared by every trainable component
- StochasticGRUCell: GRU whose gates also receive a latent vector z_t
- DeterministicGRUCell: the regular GRU (the stochastic cell with C = 0)
- MLP: affine/activation chain with an identity or softplus head
- LSTMCell: standard four-gate LSTM, used by the benchmark

Every ``step``/``forward`` accepts vectors or column-batched matrices, so the
same cell evaluates one sequence or many Monte-Carlo simulations at once.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .autodiff import Tensor, affine, as_tensor, relu, sigmoid, softplus, tanh
from .exceptions import ConfigError, ContractError, DimensionError

ACTIVATIONS = {"tanh": tanh, "relu": relu, "sigmoid": sigmoid}
HEADS = ("identity", "softplus")
GATES = ("u", "r", "h")


def uniform_init(rng: Optional[np.random.Generator], shape: Tuple[int, ...], fan_in: int) -> Tensor:
    """Trainable tensor drawn from U(-1/sqrt(fan_in), +1/sqrt(fan_in)).

    A ``None`` generator yields zeros, which the analytic checks rely on.
    """
    if rng is None:
        return Tensor(np.zeros(shape), requires_grad=True)
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def _zeros(shape: Tuple[int, ...]) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def _require_positive(**dims: int) -> None:
    for name, value in dims.items():
        if int(value) < 1:
            raise ContractError(f"{name} must be positive, got {value}")


class Module:
    """Base class collecting trainable tensors from attributes in definition order."""

    def named_parameters(self, prefix: str = "") -> List[Tuple[str, Tensor]]:
        found: List[Tuple[str, Tensor]] = []
        for name, value in vars(self).items():
            if isinstance(value, Tensor):
                if value.requires_grad:
                    found.append((prefix + name, value))
            elif isinstance(value, Module):
                found.extend(value.named_parameters(f"{prefix}{name}."))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Tensor) and item.requires_grad:
                        found.append((f"{prefix}{name}.{i}", item))
                    elif isinstance(item, Module):
                        found.extend(item.named_parameters(f"{prefix}{name}.{i}."))
        return found

    def parameters(self) -> List[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def num_parameters(self) -> int:
        return int(sum(p.value.size for p in self.parameters()))

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Copy arrays into the parameters, checking names and shapes."""
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        if missing:
            raise ContractError(f"State is missing parameters: {', '.join(missing)}")
        for name, p in params.items():
            array = np.asarray(state[name], dtype=np.float64)
            if array.shape != p.shape:
                raise DimensionError(f"load {name}", [p.shape, array.shape])
            p.value[...] = array


class StochasticGRUCell(Module):
    """GRU cell whose gate pre-activations receive a latent vector through C.

    u_t = sigmoid(W_u x_t + C_u z_t + M_u h_{t-1} + b_u)
    r_t = sigmoid(W_r x_t + C_r z_t + M_r h_{t-1} + b_r)
    h~_t = tanh(W_h x_t + C_h z_t + r_t * (M_h h_{t-1}) + b_h)
    h_t = u_t * h_{t-1} + (1 - u_t) * h~_t

    The reset gate multiplies the projected recurrent term.
    """

    def __init__(
        self,
        input_dim: int,
        hidden_dim: int,
        latent_dim: int,
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        _require_positive(input_dim=input_dim, hidden_dim=hidden_dim, latent_dim=latent_dim)
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        self.latent_dim = int(latent_dim)
        for gate in GATES:
            setattr(self, f"W_{gate}", uniform_init(rng, (hidden_dim, input_dim), input_dim))
            setattr(self, f"C_{gate}", uniform_init(rng, (hidden_dim, latent_dim), latent_dim))
            setattr(self, f"M_{gate}", uniform_init(rng, (hidden_dim, hidden_dim), hidden_dim))
            setattr(self, f"b_{gate}", _zeros((hidden_dim,)))

    def _check(self, h_prev: Tensor, x: Tensor, z: Tensor) -> None:
        if (
            h_prev.shape[0] != self.hidden_dim
            or x.shape[0] != self.input_dim
            or z.shape[0] != self.latent_dim
            or len({h_prev.shape[1:], x.shape[1:], z.shape[1:]}) != 1
        ):
            raise DimensionError(
                "sgru_step",
                [h_prev.shape, x.shape, z.shape],
                f"cell expects hidden={self.hidden_dim}, input={self.input_dim}, latent={self.latent_dim}",
            )

    def step(self, h_prev, x, z) -> Tensor:
        """One stochastic GRU update; returns h_t."""
        h_prev, x, z = as_tensor(h_prev), as_tensor(x), as_tensor(z)
        self._check(h_prev, x, z)
        u = sigmoid(affine(self.W_u, x, self.b_u) + self.C_u @ z + self.M_u @ h_prev)
        r = sigmoid(affine(self.W_r, x, self.b_r) + self.C_r @ z + self.M_r @ h_prev)
        candidate = tanh(affine(self.W_h, x, self.b_h) + self.C_h @ z + r * (self.M_h @ h_prev))
        return u * h_prev + (1.0 - u) * candidate

    def deterministic(self) -> "DeterministicGRUCell":
        """Regular GRU sharing this cell's W, M and b values (C dropped)."""
        cell = DeterministicGRUCell(self.input_dim, self.hidden_dim)
        for gate in GATES:
            for kind in ("W", "M", "b"):
                getattr(cell, f"{kind}_{gate}").value[...] = getattr(self, f"{kind}_{gate}").value
        return cell


class DeterministicGRUCell(Module):
    """Regular GRU cell; identical to StochasticGRUCell with every C set to zero."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: Optional[np.random.Generator] = None) -> None:
        _require_positive(input_dim=input_dim, hidden_dim=hidden_dim)
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        for gate in GATES:
            setattr(self, f"W_{gate}", uniform_init(rng, (hidden_dim, input_dim), input_dim))
            setattr(self, f"M_{gate}", uniform_init(rng, (hidden_dim, hidden_dim), hidden_dim))
            setattr(self, f"b_{gate}", _zeros((hidden_dim,)))

    def step(self, h_prev, x) -> Tensor:
        h_prev, x = as_tensor(h_prev), as_tensor(x)
        if (
            h_prev.shape[0] != self.hidden_dim
            or x.shape[0] != self.input_dim
            or h_prev.shape[1:] != x.shape[1:]
        ):
            raise DimensionError(
                "gru_step",
                [h_prev.shape, x.shape],
                f"cell expects hidden={self.hidden_dim}, input={self.input_dim}",
            )
        u = sigmoid(affine(self.W_u, x, self.b_u) + self.M_u @ h_prev)
        r = sigmoid(affine(self.W_r, x, self.b_r) + self.M_r @ h_prev)
        candidate = tanh(affine(self.W_h, x, self.b_h) + r * (self.M_h @ h_prev))
        return u * h_prev + (1.0 - u) * candidate


class MLP(Module):
    """Multi-layer perceptron.

    ``hidden_layers`` layers of ``width`` units with ``activation``, followed
    by an affine output layer and the declared head (identity or softplus).
    ``hidden_layers=0`` gives a single affine map.
    """

    def __init__(
        self,
        input_dim: int,
        output_dim: int,
        hidden_layers: int = 1,
        width: int = 16,
        activation: str = "tanh",
        head: str = "identity",
        rng: Optional[np.random.Generator] = None,
    ) -> None:
        _require_positive(input_dim=input_dim, output_dim=output_dim)
        if hidden_layers < 0:
            raise ContractError(f"hidden_layers must be non-negative, got {hidden_layers}")
        if hidden_layers:
            _require_positive(width=width)
        if activation not in ACTIVATIONS:
            raise ConfigError(f"Unknown activation {activation!r}", field="activation")
        if head not in HEADS:
            raise ConfigError(f"Unknown output head {head!r}", field="head")

        self.sizes = [int(input_dim)] + [int(width)] * int(hidden_layers) + [int(output_dim)]
        self.activation = activation
        self.head = head
        self.weights: List[Tensor] = []
        self.biases: List[Tensor] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            self.weights.append(uniform_init(rng, (fan_out, fan_in), fan_in))
            self.biases.append(_zeros((fan_out,)))

    @property
    def input_dim(self) -> int:
        return self.sizes[0]

    @property
    def output_dim(self) -> int:
        return self.sizes[-1]

    def forward(self, x) -> Tensor:
        x = as_tensor(x)
        if x.shape[0] != self.input_dim:
            raise DimensionError("mlp_forward", [x.shape], f"expected input dim {self.input_dim}")
        act = ACTIVATIONS[self.activation]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = affine(w, x, b)
            if i < last:
                x = act(x)
        return softplus(x) if self.head == "softplus" else x

    __call__ = forward


class LSTMCell(Module):
    """Standard LSTM cell (input, forget, output gates and candidate; no peepholes)."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: Optional[np.random.Generator] = None) -> None:
        _require_positive(input_dim=input_dim, hidden_dim=hidden_dim)
        self.input_dim = int(input_dim)
        self.hidden_dim = int(hidden_dim)
        for gate in ("i", "f", "o", "g"):
            setattr(self, f"W_{gate}", uniform_init(rng, (hidden_dim, input_dim), input_dim))
            setattr(self, f"U_{gate}", uniform_init(rng, (hidden_dim, hidden_dim), hidden_dim))
            setattr(self, f"b_{gate}", _zeros((hidden_dim,)))

    def initial_state(self) -> Tuple[Tensor, Tensor]:
        return Tensor(np.zeros(self.hidden_dim)), Tensor(np.zeros(self.hidden_dim))

    def step(self, state: Sequence, x) -> Tuple[Tensor, Tensor]:
        h_prev, c_prev = (as_tensor(s) for s in state)
        x = as_tensor(x)
        if (
            h_prev.shape != c_prev.shape
            or h_prev.shape[0] != self.hidden_dim
            or x.shape[0] != self.input_dim
            or h_prev.shape[1:] != x.shape[1:]
        ):
            raise DimensionError(
                "lstm_step",
                [h_prev.shape, c_prev.shape, x.shape],
                f"cell expects hidden={self.hidden_dim}, input={self.input_dim}",
            )
        i = sigmoid(affine(self.W_i, x, self.b_i) + self.U_i @ h_prev)
        f = sigmoid(affine(self.W_f, x, self.b_f) + self.U_f @ h_prev)
        o = sigmoid(affine(self.W_o, x, self.b_o) + self.U_o @ h_prev)
        g = tanh(affine(self.W_g, x, self.b_g) + self.U_g @ h_prev)
        c = f * c_prev + i * g
        return o * tanh(c), c
