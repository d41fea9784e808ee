"""Reverse-mode automatic differentiation over dense float64 arrays.

Everything differentiable in the model is expressed through the primitives
here.  A ``Tensor`` wraps a numpy array; while a ``Tape`` is active, every
primitive appends a record, and ``Tape.backward`` replays the records in
exact reverse execution order, summing gradients into tensors that are
consumed by more than one operation.

Design notes:
  * float64 only, so finite-difference checks can use tight tolerances;
  * no active tape means forward-only evaluation (used for decoding);
  * ``logsumexp`` is a first-class primitive with max-subtraction
    stabilization, which the CRF partition function depends on.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DimensionError",
    "Tensor",
    "Tape",
    "backward",
    "add",
    "mul",
    "matmul",
    "tanh",
    "sigmoid",
    "exp",
    "log",
    "relu",
    "elu",
    "leaky_relu",
    "softmax",
    "logsumexp",
    "amax",
    "tsum",
    "tmean",
    "concat",
    "reshape",
    "transpose",
    "getitem",
]


class DimensionError(ValueError):
    """Raised when operand shapes are incompatible for an operation."""


class Tensor:
    """Dense float64 value with an optional gradient buffer.

    ``requires_grad`` marks leaves whose gradient should be retained;
    outputs of recorded operations inherit it so the backward sweep can
    flow through them.
    """

    __slots__ = ("data", "grad", "requires_grad", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        tag = self.name or "tensor"
        return f"Tensor({tag}, shape={self.data.shape}, requires_grad={self.requires_grad})"

    # operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, neg(other))

    def __rsub__(self, other):
        return add(other, neg(self))

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


class Tape:
    """Ordered record of executed primitives for one forward pass.

    Used as a context manager; primitives executed inside the ``with``
    block are recorded when any input requires a gradient.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        _TAPE_STACK.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> bool:
        _TAPE_STACK.pop()
        return False

    def __len__(self) -> int:
        return len(self._records)

    def record(self, out: Tensor, inputs: tuple[Tensor, ...], pull: Callable) -> None:
        self._records.append((out, inputs, pull))

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(tensor) into ``grad`` of every recorded tensor.

        ``loss`` must be a scalar (size 1) produced on this tape.
        """
        if loss.size != 1:
            raise ValueError(f"backward requires a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for out, inputs, pull in reversed(self._records):
            if out.grad is None:
                continue
            for tensor, grad in zip(inputs, pull(out.grad)):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor.grad is None:
                    tensor.grad = np.zeros_like(tensor.data)
                tensor.grad += grad


_TAPE_STACK: list[Tape] = []


def backward(loss: Tensor, tape: Tape) -> None:
    """Run the reverse sweep of ``tape`` from scalar ``loss``."""
    tape.backward(loss)


def _active_tape() -> Tape | None:
    return _TAPE_STACK[-1] if _TAPE_STACK else None


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(out_data: np.ndarray, inputs: tuple[Tensor, ...], pull: Callable) -> Tensor:
    tape = _active_tape()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(out_data, requires_grad=needs)
    if needs:
        tape.record(out, inputs, pull)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes numpy broadcast to reach ``grad.shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# primitives -------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise DimensionError(f"add: shapes {a.shape} and {b.shape} do not broadcast") from None

    def pull(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(out, (a, b), pull)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _make(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError:
        raise DimensionError(f"mul: shapes {a.shape} and {b.shape} do not broadcast") from None

    def pull(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(out, (a, b), pull)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: inner dimensions disagree: {a.shape} x {b.shape}")
    out = a.data @ b.data

    def pull(g):
        return g @ b.data.T, a.data.T @ g

    return _make(out, (a, b), pull)


def tanh(a) -> Tensor:
    a = _as_tensor(a)
    y = np.tanh(a.data)
    return _make(y, (a,), lambda g: (g * (1.0 - y * y),))


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    y = np.empty_like(x)
    pos = x >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    y[~pos] = ex / (1.0 + ex)
    return _make(y, (a,), lambda g: (g * y * (1.0 - y),))


def exp(a) -> Tensor:
    a = _as_tensor(a)
    y = np.exp(a.data)
    return _make(y, (a,), lambda g: (g * y,))


def log(a) -> Tensor:
    a = _as_tensor(a)
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,))


def relu(a) -> Tensor:
    a = _as_tensor(a)
    y = np.maximum(a.data, 0.0)
    return _make(y, (a,), lambda g: (g * (a.data > 0.0),))


def elu(a, alpha: float = 1.0) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    y = np.where(x > 0.0, x, alpha * np.expm1(x))
    # derivative is alpha*exp(x) = y + alpha below zero, 1 above (continuous at 0)
    return _make(y, (a,), lambda g: (g * np.where(x > 0.0, 1.0, y + alpha),))


def leaky_relu(a, slope: float = 0.2) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    y = np.where(x > 0.0, x, slope * x)
    return _make(y, (a,), lambda g: (g * np.where(x > 0.0, 1.0, slope),))


def softmax(a, axis: int = -1) -> Tensor:
    a = _as_tensor(a)
    shifted = a.data - np.max(a.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def pull(g):
        inner = np.sum(g * y, axis=axis, keepdims=True)
        return (y * (g - inner),)

    return _make(y, (a,), pull)


def logsumexp(a, axis: int | None = None) -> Tensor:
    a = _as_tensor(a)
    m = np.max(a.data, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    e = np.exp(a.data - m)
    s = np.sum(e, axis=axis, keepdims=True)
    out_keep = m + np.log(s)
    soft = e / s
    if axis is None:
        out = out_keep.reshape(())
    else:
        out = np.squeeze(out_keep, axis=axis)

    def pull(g):
        if axis is None:
            return (g * soft,)
        return (np.expand_dims(g, axis) * soft,)

    return _make(out, (a,), pull)


def amax(a, axis: int | None = None) -> Tensor:
    """Maximum along an axis; ties route the gradient to the lowest index."""
    a = _as_tensor(a)
    out = np.max(a.data, axis=axis)

    def pull(g):
        z = np.zeros_like(a.data)
        if axis is None:
            idx = np.unravel_index(np.argmax(a.data), a.data.shape)
            z[idx] = g
        else:
            arg = np.expand_dims(np.argmax(a.data, axis=axis), axis)
            np.put_along_axis(z, arg, np.expand_dims(g, axis), axis=axis)
        return (z,)

    return _make(out, (a,), pull)


def tsum(a, axis: int | None = None) -> Tensor:
    a = _as_tensor(a)
    out = np.sum(a.data, axis=axis)

    def pull(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _make(out, (a,), pull)


def tmean(a, axis: int | None = None) -> Tensor:
    a = _as_tensor(a)
    out = np.mean(a.data, axis=axis)
    n = a.size if axis is None else a.shape[axis]

    def pull(g):
        if axis is None:
            return (np.broadcast_to(g / n, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g / n, axis), a.shape).copy(),)

    return _make(out, (a,), pull)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    parts = tuple(_as_tensor(t) for t in tensors)
    if not parts:
        raise DimensionError("concat of an empty sequence")
    try:
        out = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError:
        raise DimensionError(
            f"concat: incompatible shapes {[p.shape for p in parts]} along axis {axis}"
        ) from None
    sizes = [p.shape[axis] for p in parts]
    splits = np.cumsum(sizes)[:-1]

    def pull(g):
        return tuple(np.ascontiguousarray(piece) for piece in np.split(g, splits, axis=axis))

    return _make(out, parts, pull)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a) -> Tensor:
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise DimensionError(f"transpose expects a 2-D tensor, got {a.shape}")
    return _make(a.data.T.copy(), (a,), lambda g: (g.T,))


def getitem(a, idx) -> Tensor:
    """Basic or advanced indexing; backward scatter-adds (duplicates sum)."""
    a = _as_tensor(a)
    out = np.array(a.data[idx], dtype=np.float64)

    def pull(g):
        z = np.zeros_like(a.data)
        np.add.at(z, idx, g.reshape(np.shape(a.data[idx])))
        return (z,)

    return _make(out, (a,), pull)
