"""Reverse-mode differentiation engine over dense 1-D/2-D float64 tensors.

Every trainable model in the package is expressed through :class:`Tensor`.
Values are computed eagerly; each non-leaf tensor records its parents and a
local-gradient rule, and :func:`backward` sweeps that record in reverse
topological order.

Typical usage:
    from sgru_forecast.autodiff import Tensor, backward

    x = Tensor([3.0], requires_grad=True)
    y = (x * x).sum()
    backward(y)
    x.grad  # array([6.])
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import ContractError, DimensionError, NumericError

Number = Union[int, float]
_SCALARS = (int, float, np.number)
GradFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class Tensor:
    """A node in a differentiable computation graph.

    Attributes:
        value: float64 array of rank 1 or 2
        requires_grad: Whether gradients flow into this tensor
        parents: Input tensors of the producing op (empty for leaves)
        op: Name of the producing primitive (None for leaves)
    """

    __slots__ = ("value", "requires_grad", "parents", "op", "_grad_fn", "_grad")

    # ndarray <op> Tensor must defer to the Tensor's reflected operator
    __array_ufunc__ = None

    def __init__(self, value, requires_grad: bool = False) -> None:
        array = np.array(value, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1)
        if array.ndim > 2 or array.size == 0:
            raise DimensionError("tensor", [array.shape], "rank must be 1 or 2 with non-empty dims")
        self.value = array
        self.requires_grad = requires_grad
        self.parents: Tuple[Tensor, ...] = ()
        self.op: Optional[str] = None
        self._grad_fn: Optional[GradFn] = None
        self._grad: Optional[np.ndarray] = None

    @classmethod
    def _record(cls, value: np.ndarray, parents: Sequence["Tensor"], op: str, grad_fn: GradFn) -> "Tensor":
        out = cls.__new__(cls)
        out.value = value
        out._grad = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out.parents = tuple(parents)
            out.op = op
            out._grad_fn = grad_fn
        else:
            # nothing upstream needs a gradient: the result is a constant leaf
            out.parents = ()
            out.op = None
            out._grad_fn = None
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.value.shape

    @property
    def is_leaf(self) -> bool:
        return self._grad_fn is None

    @property
    def grad(self) -> np.ndarray:
        """Accumulated gradient, allocated as zeros on first access."""
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        return self._grad

    @grad.setter
    def grad(self, value: Optional[np.ndarray]) -> None:
        self._grad = value

    def zero_grad(self) -> None:
        self._grad = None

    def item(self) -> float:
        if self.value.size != 1:
            raise ContractError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.value.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.value.copy()

    def detach(self) -> "Tensor":
        """Copy of the value as a constant leaf, cut from the tape."""
        return Tensor(self.value)

    def __repr__(self) -> str:
        label = f", op={self.op}" if self.op else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{label})"

    def __add__(self, other):
        if isinstance(other, _SCALARS):
            return shift(self, other)
        return add(self, _lift(other))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        if isinstance(other, _SCALARS):
            return shift(self, -other)
        return sub(self, _lift(other))

    def __rsub__(self, other):
        if isinstance(other, _SCALARS):
            return shift(neg(self), other)
        return sub(_lift(other), self)

    def __mul__(self, other):
        if isinstance(other, _SCALARS):
            return scale(self, other)
        return mul(self, _lift(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        if isinstance(other, _SCALARS):
            return scale(self, 1.0 / other)
        return div(self, _lift(other))

    def __rtruediv__(self, other):
        return div(_lift(other), self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, _lift(other))

    def __rmatmul__(self, other):
        return matmul(_lift(other), self)

    def sum(self) -> "Tensor":
        return sum_all(self)


def _lift(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def as_tensor(value) -> Tensor:
    """Return ``value`` unchanged if it is a Tensor, else wrap it as a constant."""
    return _lift(value)


_PRIMITIVES: Dict[str, Callable[..., Tensor]] = {}


def _primitive(name: str):
    def register(fn):
        _PRIMITIVES[name] = fn
        return fn
    return register


def forward_primitive(kind: str, *inputs, **attrs) -> Tensor:
    """Apply a named primitive to tensors.

    Args:
        kind: Primitive name (see :data:`PRIMITIVES`)
        *inputs: Operand tensors (arrays and numbers are lifted to constants)
        **attrs: Non-tensor attributes such as ``factor`` or ``start``/``stop``

    Returns:
        New tensor recording its parents and local gradients

    Raises:
        ContractError: If the primitive is unknown
        DimensionError: If operand shapes do not conform
    """
    try:
        fn = _PRIMITIVES[kind]
    except KeyError:
        raise ContractError(f"Unknown primitive: {kind!r}")
    return fn(*[_lift(t) for t in inputs], **attrs)


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise DimensionError(op, [a.shape, b.shape])


@_primitive("add")
def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return Tensor._record(a.value + b.value, (a, b), "add", lambda g: (g, g))


@_primitive("sub")
def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return Tensor._record(a.value - b.value, (a, b), "sub", lambda g: (g, -g))


@_primitive("mul")
def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product."""
    _same_shape("mul", a, b)
    av, bv = a.value, b.value
    return Tensor._record(av * bv, (a, b), "mul", lambda g: (g * bv, g * av))


@_primitive("div")
def div(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("div", a, b)
    av, bv = a.value, b.value
    out = av / bv
    return Tensor._record(out, (a, b), "div", lambda g: (g / bv, -g * out / bv))


@_primitive("neg")
def neg(a: Tensor) -> Tensor:
    return Tensor._record(-a.value, (a,), "neg", lambda g: (-g,))


@_primitive("scale")
def scale(a: Tensor, factor: Number) -> Tensor:
    factor = float(factor)
    return Tensor._record(a.value * factor, (a,), "scale", lambda g: (g * factor,))


@_primitive("shift")
def shift(a: Tensor, offset: Number) -> Tensor:
    return Tensor._record(a.value + float(offset), (a,), "shift", lambda g: (g,))


@_primitive("square")
def square(a: Tensor) -> Tensor:
    av = a.value
    return Tensor._record(av * av, (a,), "square", lambda g: (2.0 * g * av,))


@_primitive("sigmoid")
def sigmoid(a: Tensor) -> Tensor:
    out = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return Tensor._record(out, (a,), "sigmoid", lambda g: (g * out * (1.0 - out),))


@_primitive("tanh")
def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.value)
    return Tensor._record(out, (a,), "tanh", lambda g: (g * (1.0 - out * out),))


@_primitive("softplus")
def softplus(a: Tensor) -> Tensor:
    av = a.value
    out = np.logaddexp(0.0, av)
    return Tensor._record(out, (a,), "softplus", lambda g: (g * 0.5 * (1.0 + np.tanh(0.5 * av)),))


@_primitive("relu")
def relu(a: Tensor) -> Tensor:
    mask = (a.value > 0.0).astype(np.float64)
    return Tensor._record(a.value * mask, (a,), "relu", lambda g: (g * mask,))


@_primitive("exp")
def exp(a: Tensor) -> Tensor:
    out = np.exp(a.value)
    return Tensor._record(out, (a,), "exp", lambda g: (g * out,))


@_primitive("log")
def log(a: Tensor) -> Tensor:
    av = a.value
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(av)
    return Tensor._record(out, (a,), "log", lambda g: (g / av,))


@_primitive("sum")
def sum_all(a: Tensor) -> Tensor:
    """Reduce every element to a length-1 tensor."""
    shape = a.shape
    out = np.array([a.value.sum()])
    return Tensor._record(out, (a,), "sum", lambda g: (np.full(shape, g[0]),))


@_primitive("matmul")
def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix-vector or matrix-matrix product."""
    if a.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError("matmul", [a.shape, b.shape])
    av, bv = a.value, b.value

    def grad_fn(g):
        ga = gb = None
        if a.requires_grad:
            ga = np.outer(g, bv) if bv.ndim == 1 else g @ bv.T
        if b.requires_grad:
            gb = av.T @ g
        return ga, gb

    return Tensor._record(av @ bv, (a, b), "matmul", grad_fn)


@_primitive("affine")
def affine(w: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """``w @ x + b`` with ``b`` broadcast across the columns of a matrix ``x``."""
    if (
        w.value.ndim != 2
        or b.value.ndim != 1
        or w.shape[1] != x.shape[0]
        or w.shape[0] != b.shape[0]
    ):
        raise DimensionError("affine", [w.shape, x.shape, b.shape])
    wv, xv, bv = w.value, x.value, b.value
    batched = xv.ndim == 2
    out = wv @ xv + (bv[:, None] if batched else bv)

    def grad_fn(g):
        gw = gx = gb = None
        if w.requires_grad:
            gw = g @ xv.T if batched else np.outer(g, xv)
        if x.requires_grad:
            gx = wv.T @ g
        if b.requires_grad:
            gb = g.sum(axis=1) if batched else g
        return gw, gx, gb

    return Tensor._record(out, (w, x, b), "affine", grad_fn)


@_primitive("concat")
def concat(*tensors: Tensor) -> Tensor:
    """Concatenate along the first axis."""
    if not tensors:
        raise ContractError("concat needs at least one tensor")
    trailing = {t.shape[1:] for t in tensors}
    if len(trailing) != 1:
        raise DimensionError("concat", [t.shape for t in tensors])
    sizes = [t.shape[0] for t in tensors]
    bounds = np.cumsum(sizes)[:-1]
    out = np.concatenate([t.value for t in tensors], axis=0)
    return Tensor._record(out, tensors, "concat", lambda g: tuple(np.split(g, bounds, axis=0)))


@_primitive("slice")
def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    """Rows ``start:stop`` along the first axis."""
    if not 0 <= start < stop <= a.shape[0]:
        raise DimensionError("slice", [a.shape], f"rows {start}:{stop}")
    shape = a.shape

    def grad_fn(g):
        full = np.zeros(shape)
        full[start:stop] = g
        return (full,)

    return Tensor._record(a.value[start:stop].copy(), (a,), "slice", grad_fn)


PRIMITIVES = tuple(sorted(_PRIMITIVES))


@dataclass
class Graph:
    """Topologically ordered nodes of one forward pass (parents first)."""

    nodes: List[Tensor]

    @classmethod
    def build(cls, output: Tensor) -> "Graph":
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(output, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node.parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        return cls(order)

    def leaves(self) -> List[Tensor]:
        return [n for n in self.nodes if n.is_leaf and n.requires_grad]


def backward(output: Tensor) -> Dict[Tensor, np.ndarray]:
    """Accumulate d(output)/d(leaf) into every requires-grad leaf.

    Args:
        output: Scalar tensor (a single element)

    Returns:
        Mapping from each participating leaf to its accumulated gradient

    Raises:
        ContractError: If output is not scalar
    """
    if output.value.size != 1:
        raise ContractError(f"backward needs a scalar output, got shape {output.shape}")

    graph = Graph.build(output)
    pending: Dict[int, np.ndarray] = {id(output): np.ones_like(output.value)}
    result: Dict[Tensor, np.ndarray] = {}

    for node in reversed(graph.nodes):
        g = pending.pop(id(node), None)
        if g is None:
            continue
        if node.is_leaf:
            if node.requires_grad:
                if node._grad is None:
                    node._grad = np.array(g, dtype=np.float64)
                else:
                    node._grad += g
                result[node] = node._grad
            continue
        for parent, parent_grad in zip(node.parents, node._grad_fn(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            if key in pending:
                pending[key] = pending[key] + parent_grad
            else:
                pending[key] = parent_grad
    return result


def zero_grad(tensors: Iterable[Tensor]) -> None:
    for t in tensors:
        t.zero_grad()


def check_finite(t: Tensor, what: str, step: Optional[int] = None) -> None:
    """Raise NumericError if any element of ``t`` is NaN or infinite."""
    if not np.all(np.isfinite(t.value)):
        raise NumericError(f"Non-finite {what}", step=step)


@dataclass
class GradCheckReport:
    """Outcome of comparing backward gradients against central differences."""

    max_rel_error: float
    passed: bool
    tol: float
    n_checked: int


def _evaluate(loss_fn: Callable[[], Tensor]) -> float:
    out = loss_fn()
    if out.value.size != 1:
        raise ContractError(f"grad_check needs a scalar function, got shape {out.shape}")
    value = float(out.value.reshape(-1)[0])
    if not np.isfinite(value):
        raise NumericError("Non-finite function value during gradient check")
    return value


def grad_check_leaves(
    loss_fn: Callable[[], Tensor],
    leaves: Sequence[Tensor],
    h: float = 1e-5,
    tol: float = 1e-5,
    atol: float = 1e-8,
) -> GradCheckReport:
    """Compare gradients of ``loss_fn`` w.r.t. ``leaves`` with central differences.

    The relative error of one coordinate is ``|a - n| / max(|a|, |n|)``.
    Coordinates whose absolute difference is at most ``atol`` count as exact
    matches. Leaf values are perturbed in place and restored afterwards.
    """
    if h <= 0:
        raise ContractError(f"Step size must be positive, got {h}")
    if atol < 0:
        raise ContractError(f"Absolute floor must be non-negative, got {atol}")

    zero_grad(leaves)
    _evaluate(loss_fn)
    backward(loss_fn())
    analytic = [leaf.grad.copy() for leaf in leaves]
    zero_grad(leaves)

    worst = 0.0
    checked = 0
    for leaf, grad in zip(leaves, analytic):
        values = leaf.value
        for idx in np.ndindex(values.shape):
            original = values[idx]
            values[idx] = original + h
            f_plus = _evaluate(loss_fn)
            values[idx] = original - h
            f_minus = _evaluate(loss_fn)
            values[idx] = original
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(grad[idx])
            diff = abs(a - numeric)
            if diff > atol:
                worst = max(worst, diff / max(abs(a), abs(numeric)))
            checked += 1
    return GradCheckReport(max_rel_error=worst, passed=worst < tol, tol=tol, n_checked=checked)


def grad_check(
    f: Callable[[Tensor], Tensor],
    point,
    h: float = 1e-5,
    tol: float = 1e-5,
    atol: float = 1e-8,
) -> GradCheckReport:
    """Gradient check of a single-argument tensor function at ``point``."""
    leaf = point if isinstance(point, Tensor) else Tensor(point, requires_grad=True)
    leaf.requires_grad = True
    return grad_check_leaves(lambda: f(leaf), [leaf], h=h, tol=tol, atol=atol)
