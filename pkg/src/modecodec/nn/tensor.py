"""Reverse-mode autodiff on numpy arrays.

A Tensor wraps an NCHW (or any-shape) float array and records the op that
produced it. backward() walks the recorded graph in reverse creation order,
which is a valid topological order because parents are always created before
their children. That order is also deterministic, so two backward passes over
the same graph accumulate gradients in the same sequence and produce bitwise
identical results.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager

import numpy as np

__all__ = ["Tensor", "ShapeError", "NumericsError", "no_grad", "is_grad_enabled"]

_ids = itertools.count()

_grad_enabled = True


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible; message names the dims."""


class NumericsError(FloatingPointError):
    """Raised when NaN/Inf shows up where finite values are required."""


@contextmanager
def no_grad():
    """Disable graph recording (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_id")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad) and _grad_enabled
        self._parents = ()
        self._backward = None
        self._id = next(_ids)

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _from_op(data: np.ndarray, parents, backward) -> "Tensor":
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self):
        return self.data.ndim

    def item(self) -> float:
        return float(self.data.item())

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=self.requires_grad)

    def check_finite(self, what: str = "tensor") -> "Tensor":
        if not np.all(np.isfinite(self.data)):
            bad = int(np.size(self.data) - np.count_nonzero(np.isfinite(self.data)))
            raise NumericsError(f"{what} contains {bad} non-finite element(s)")
        return self

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- autodiff --------------------------------------------------------------

    def _accumulate(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self):
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        nodes = []
        seen = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            if node.requires_grad:
                nodes.append(node)
                stack.extend(node._parents)
        nodes.sort(key=lambda n: n._id, reverse=True)
        self._accumulate(np.ones_like(self.data))
        for node in nodes:
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def zero_grad(self):
        self.grad = None


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Reduce gradient g back to `shape` after numpy broadcasting."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


# -- elementwise binary ops ----------------------------------------------------

def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    data = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return Tensor._from_op(data, (a, b), backward)


def sub(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    data = a.data - b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return Tensor._from_op(data, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    data = a.data * b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return Tensor._from_op(data, (a, b), backward)


def div(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    data = a.data / b.data

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return Tensor._from_op(data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(-g)

    return Tensor._from_op(-a.data, (a,), backward)


# -- elementwise unary ops -----------------------------------------------------

def square(a: Tensor) -> Tensor:
    def backward(g):
        a._accumulate(g * (2.0 * a.data))

    return Tensor._from_op(a.data * a.data, (a,), backward)


def sqrt(a: Tensor) -> Tensor:
    data = np.sqrt(a.data)

    def backward(g):
        a._accumulate(g * (0.5 / data))

    return Tensor._from_op(data, (a,), backward)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def backward(g):
        a._accumulate(g * data)

    return Tensor._from_op(data, (a,), backward)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def backward(g):
        a._accumulate(g / a.data)

    return Tensor._from_op(data, (a,), backward)


def absolute(a: Tensor) -> Tensor:
    data = np.abs(a.data)

    def backward(g):
        a._accumulate(g * np.sign(a.data))

    return Tensor._from_op(data, (a,), backward)


def softplus(a: Tensor) -> Tensor:
    # log(1 + e^x), computed as max(x, 0) + log1p(e^-|x|) to avoid overflow
    data = np.maximum(a.data, 0) + np.log1p(np.exp(-np.abs(a.data)))

    def backward(g):
        sig = 1.0 / (1.0 + np.exp(-a.data))
        a._accumulate(g * sig)

    return Tensor._from_op(data, (a,), backward)


def leaky_relu(a: Tensor, slope: float = 0.01) -> Tensor:
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must be in (0, 1), got {slope}")
    pos = a.data >= 0
    data = np.where(pos, a.data, slope * a.data)

    def backward(g):
        a._accumulate(g * np.where(pos, 1.0, slope).astype(g.dtype))

    return Tensor._from_op(data, (a,), backward)


def relu(a: Tensor) -> Tensor:
    pos = a.data > 0
    data = np.where(pos, a.data, 0.0).astype(a.data.dtype)

    def backward(g):
        a._accumulate(g * pos.astype(g.dtype))

    return Tensor._from_op(data, (a,), backward)


def clip(a: Tensor, lo: float, hi: float, straight_through: bool = False) -> Tensor:
    """Clamp into [lo, hi]. Gradient is zero outside the range unless
    straight_through is set, in which case it passes unchanged."""
    if lo > hi:
        raise ValueError(f"clip bounds inverted: lo={lo} > hi={hi}")
    inside = (a.data >= lo) & (a.data <= hi)
    data = np.clip(a.data, lo, hi)

    def backward(g):
        if straight_through:
            a._accumulate(g)
        else:
            a._accumulate(g * inside.astype(g.dtype))

    return Tensor._from_op(data, (a,), backward)


def maximum(a: Tensor, floor: float) -> Tensor:
    """Elementwise max with a constant; gradient flows only where a > floor."""
    above = a.data > floor
    data = np.maximum(a.data, floor)

    def backward(g):
        a._accumulate(g * above.astype(g.dtype))

    return Tensor._from_op(data, (a,), backward)


def where(cond: np.ndarray, a: Tensor, b: Tensor) -> Tensor:
    """Select from a where cond else b. cond is a plain bool array."""
    cond = np.asarray(cond, dtype=bool)
    data = np.where(cond, a.data, b.data)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.where(cond, g, 0.0), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.where(cond, 0.0, g), b.shape))

    return Tensor._from_op(data, (a, b), backward)


# -- reductions / reshaping ----------------------------------------------------

def tsum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.shape).copy() if np.ndim(g) else np.full(a.shape, g, dtype=a.data.dtype))
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape).copy())

    return Tensor._from_op(np.asarray(data), (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    n = a.data.size if axis is None else np.prod([a.shape[ax] for ax in np.atleast_1d(axis)])
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / float(n))


def reshape(a: Tensor, shape) -> Tensor:
    def backward(g):
        a._accumulate(g.reshape(a.shape))

    return Tensor._from_op(a.data.reshape(shape), (a,), backward)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = list(tensors)
    ref = tensors[0]
    for t in tensors[1:]:
        if len(t.shape) != len(ref.shape) or any(
            i != axis and t.shape[i] != ref.shape[i] for i in range(len(ref.shape))
        ):
            raise ShapeError(
                f"concat along axis {axis} needs matching other dims, got {ref.shape} vs {t.shape}"
            )
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return Tensor._from_op(data, tuple(tensors), backward)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    idx = [slice(None)] * a.ndim
    idx[axis] = slice(start, start + length)
    idx = tuple(idx)

    def backward(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        a._accumulate(full)

    return Tensor._from_op(a.data[idx].copy(), (a,), backward)


# operator sugar
Tensor.__add__ = lambda self, other: add(self, other)
Tensor.__radd__ = lambda self, other: add(self, other)
Tensor.__sub__ = lambda self, other: sub(self, other)
Tensor.__rsub__ = lambda self, other: add(neg(self), other)
Tensor.__mul__ = lambda self, other: mul(self, other)
Tensor.__rmul__ = lambda self, other: mul(self, other)
Tensor.__truediv__ = lambda self, other: div(self, other)
Tensor.__neg__ = lambda self: neg(self)
