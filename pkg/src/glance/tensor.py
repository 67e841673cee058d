"""Dense 2-D tensors with a define-by-run reverse-mode gradient tape.

Every tensor is a float64 matrix.  Operations that touch a tensor with
``requires_grad`` record their parents and a local backward rule; calling
``backward()`` on a 1x1 result walks that record in reverse topological
order and accumulates gradients on every tensor that asked for them.

Values are read-only once created, so finished tensors can be shared.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError, UsageError, ValidationError

__all__ = [
    "Tensor", "tensor", "GradCheckReport",
    "matmul", "concat_cols", "sigmoid", "relu", "softmax_rows", "add", "sub",
    "mul", "scale", "add_row", "mul_row", "transpose", "sum", "mean",
    "row_select", "col_select", "scatter_dense", "row_normalize",
    "entropy_rows", "cross_entropy", "topological_order", "grad_check",
]


def _as_matrix(data) -> np.ndarray:
    arr = np.array(data, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    elif arr.ndim != 2:
        raise DimensionError(f"tensors are 2-D, got array with shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"tensors need at least one row and column, got {arr.shape}")
    return arr


class Tensor:
    """A 2-D float64 matrix that can take part in the gradient tape."""

    __slots__ = ("values", "requires_grad", "grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        values = _as_matrix(data)
        values.flags.writeable = False
        self.values = values
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self.name = name

    @classmethod
    def _from_op(cls, values: np.ndarray, parents, backward) -> "Tensor":
        out = cls.__new__(cls)
        values = np.asarray(values, dtype=np.float64)
        values.flags.writeable = False
        out.values = values
        out.grad = None
        out.name = None
        out.requires_grad = any(p.requires_grad for p in parents)
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def item(self) -> float:
        if self.shape != (1, 1):
            raise UsageError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.values[0, 0])

    def numpy(self) -> np.ndarray:
        return self.values

    def detach(self) -> "Tensor":
        return Tensor(self.values)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from this scalar through the recorded operations."""
        if self.shape != (1, 1):
            raise UsageError(f"backward() needs a scalar (1x1) output, got {self.shape}")
        if not self.requires_grad:
            return
        order = topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones((1, 1))}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                grads[key] = pg if key not in grads else grads[key] + pg

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.values.tolist()!r}{flag})"

    def __add__(self, other):
        return add(self, _wrap(other, self.shape))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other, self.shape))

    def __rsub__(self, other):
        return sub(_wrap(other, self.shape), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


def tensor(data, requires_grad: bool = False, name: str | None = None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, name=name)


def _wrap(other, shape) -> Tensor:
    if isinstance(other, Tensor):
        return other
    if isinstance(other, (int, float)):
        return Tensor(np.full(shape, float(other)))
    return Tensor(other)


def topological_order(root: Tensor) -> list[Tensor]:
    """Every reachable tape node, parents strictly before children."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- linear algebra ---------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} are not aligned")
    av, bv = a.values, b.values
    return Tensor._from_op(av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a: Tensor) -> Tensor:
    return Tensor._from_op(a.values.T.copy(), (a,), lambda g: (g.T,))


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.rows != b.rows:
        raise DimensionError(f"concat_cols: row counts of {a.shape} and {b.shape} differ")
    m = a.cols
    return Tensor._from_op(
        np.concatenate([a.values, b.values], axis=1),
        (a, b),
        lambda g: (g[:, :m], g[:, m:]),
    )


# -- elementwise ------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return Tensor._from_op(a.values + b.values, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return Tensor._from_op(a.values - b.values, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    av, bv = a.values, b.values
    return Tensor._from_op(av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return Tensor._from_op(a.values * c, (a,), lambda g: (g * c,))


def add_row(a: Tensor, row: Tensor) -> Tensor:
    """Add a 1 x m row vector to every row of an n x m matrix (bias add)."""
    if row.rows != 1 or row.cols != a.cols:
        raise DimensionError(f"add_row: cannot add {row.shape} to every row of {a.shape}")
    return Tensor._from_op(
        a.values + row.values, (a, row), lambda g: (g, g.sum(axis=0, keepdims=True))
    )


def mul_row(a: Tensor, row: Tensor) -> Tensor:
    """Scale each column j of an n x m matrix by row[0, j]."""
    if row.rows != 1 or row.cols != a.cols:
        raise DimensionError(f"mul_row: cannot scale {a.shape} by {row.shape}")
    av, rv = a.values, row.values
    return Tensor._from_op(
        av * rv, (a, row), lambda g: (g * rv, (g * av).sum(axis=0, keepdims=True))
    )


def sigmoid(x: Tensor) -> Tensor:
    v = x.values
    # split by sign so exp never overflows
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),))


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0
    return Tensor._from_op(np.where(mask, x.values, 0.0), (x,), lambda g: (g * mask,))


def _softmax(v: np.ndarray) -> np.ndarray:
    shifted = v - v.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows(x: Tensor) -> Tensor:
    p = _softmax(x.values)

    def backward(g):
        return (p * (g - (g * p).sum(axis=1, keepdims=True)),)

    return Tensor._from_op(p, (x,), backward)


# -- reductions and indexing ------------------------------------------------

def sum(x: Tensor, axis: int | None = None) -> Tensor:  # noqa: A001 - mirrors numpy
    shape = x.shape
    if axis is None:
        return Tensor._from_op(
            np.array([[x.values.sum()]]), (x,), lambda g: (np.full(shape, g[0, 0]),)
        )
    if axis not in (0, 1):
        raise UsageError(f"axis must be None, 0 or 1, got {axis!r}")
    out = x.values.sum(axis=axis, keepdims=True)
    return Tensor._from_op(out, (x,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(x: Tensor, axis: int | None = None) -> Tensor:
    count = x.values.size if axis is None else x.shape[axis]
    return scale(sum(x, axis), 1.0 / count)


def row_select(x: Tensor, indices) -> Tensor:
    """Gather rows by index (repeats allowed); backward scatter-adds."""
    idx = np.asarray(indices, dtype=np.intp).reshape(-1)
    if idx.size == 0:
        raise DimensionError("row_select: empty index list")
    if idx.min() < 0 or idx.max() >= x.rows:
        raise DimensionError(f"row_select: index out of range for {x.rows} rows")
    shape = x.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return Tensor._from_op(x.values[idx], (x,), backward)


def col_select(x: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.intp).reshape(-1)
    if idx.size == 0:
        raise DimensionError("col_select: empty index list")
    if idx.min() < 0 or idx.max() >= x.cols:
        raise DimensionError(f"col_select: index out of range for {x.cols} columns")
    shape = x.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, (slice(None), idx), g)
        return (out,)

    return Tensor._from_op(x.values[:, idx], (x,), backward)


def scatter_dense(values: Tensor, rows, cols, shape: tuple[int, int]) -> Tensor:
    """Place the k entries of a k x 1 column at (rows[t], cols[t]) of a zero matrix."""
    r = np.asarray(rows, dtype=np.intp).reshape(-1)
    c = np.asarray(cols, dtype=np.intp).reshape(-1)
    if values.cols != 1 or values.rows != r.size or r.size != c.size:
        raise DimensionError(
            f"scatter_dense: need a k x 1 column matching {r.size} index pairs, got {values.shape}"
        )
    out = np.zeros(shape)
    np.add.at(out, (r, c), values.values[:, 0])
    return Tensor._from_op(out, (values,), lambda g: (g[r, c].reshape(-1, 1),))


def row_normalize(x: Tensor) -> Tensor:
    """Divide each row by its sum; rows that sum to zero stay zero."""
    s = x.values.sum(axis=1, keepdims=True)
    nonzero = s != 0
    safe = np.where(nonzero, s, 1.0)
    y = np.where(nonzero, x.values / safe, 0.0)

    def backward(g):
        gx = (g - (g * y).sum(axis=1, keepdims=True)) / safe
        return (np.where(nonzero, gx, 0.0),)

    return Tensor._from_op(y, (x,), backward)


def entropy_rows(logits: Tensor) -> Tensor:
    """Shannon entropy (nats) of softmax over each row, as an n x 1 column.

    Entries of -inf are allowed and contribute probability zero.
    """
    v = logits.values
    shifted = v - v.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    p = np.exp(logp)
    plogp = np.where(p > 0, p * np.where(p > 0, logp, 0.0), 0.0)
    h = -plogp.sum(axis=1, keepdims=True)

    def backward(g):
        # dH/dx_k = -p_k (log p_k + H)
        safe_logp = np.where(p > 0, logp, 0.0)
        return (np.where(p > 0, -p * (safe_logp + h), 0.0) * g,)

    return Tensor._from_op(h, (logits,), backward)


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean negative log-likelihood of integer labels under softmax(logits)."""
    y = np.asarray(labels, dtype=np.intp).reshape(-1)
    n, c = logits.shape
    if y.size != n:
        raise DimensionError(f"cross_entropy: {y.size} labels for {n} rows of logits")
    if y.size and (y.min() < 0 or y.max() >= c):
        raise ValidationError(f"cross_entropy: labels must lie in [0, {c})")
    v = logits.values
    shifted = v - v.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    nll = logz - shifted[rows, y]
    loss = nll.mean()

    def backward(g):
        p = np.exp(shifted - logz[:, None])
        p[rows, y] -= 1.0
        return (p * (g[0, 0] / n),)

    return Tensor._from_op(np.array([[loss]]), (logits,), backward)


# -- verification harness ---------------------------------------------------

@dataclass(frozen=True)
class GradCheckReport:
    max_rel_error: float
    tol: float
    analytic: np.ndarray
    numeric: np.ndarray

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def grad_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor | np.ndarray,
    step: float = 1e-5,
    tol: float = 1e-5,
    floor: float = 1e-8,
) -> GradCheckReport:
    """Compare tape gradients of scalar ``f`` at ``x`` with central differences.

    The relative error of each entry is |a - n| / max(|a|, |n|, floor); the
    floor keeps entries whose true gradient is zero from dividing noise by
    noise.
    """
    if step <= 0:
        raise UsageError("grad_check: step must be positive")
    base = np.array(x.values if isinstance(x, Tensor) else _as_matrix(x), dtype=np.float64)
    xt = Tensor(base, requires_grad=True)
    out = f(xt)
    if not isinstance(out, Tensor) or out.shape != (1, 1):
        shape = out.shape if isinstance(out, Tensor) else type(out).__name__
        raise UsageError(f"grad_check: f must return a 1x1 tensor, got {shape}")
    out.backward()
    analytic = xt.grad if xt.grad is not None else np.zeros_like(base)

    numeric = np.zeros_like(base)
    for idx in np.ndindex(base.shape):
        plus = base.copy()
        plus[idx] += step
        minus = base.copy()
        minus[idx] -= step
        numeric[idx] = (f(Tensor(plus)).item() - f(Tensor(minus)).item()) / (2 * step)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    rel = np.abs(analytic - numeric) / denom
    worst = float(rel.max()) if rel.size else 0.0
    if math.isnan(worst):
        worst = math.inf
    return GradCheckReport(worst, tol, analytic.copy(), numeric)
