"""Reverse-mode autodiff over dense numpy arrays.

A Tensor wraps one ndarray and remembers how it was produced, so a single
`backward()` from a scalar loss fills `.grad` on every tensor that was
created with `requires_grad=True`. Two float widths are supported: float32
for training and float64 for gradient-check mode (see `precision`).
"""

from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, TrainingError

_DEFAULT_DTYPE = np.float32


def default_dtype() -> np.dtype:
    return np.dtype(_DEFAULT_DTYPE)


def set_default_dtype(dtype) -> None:
    """Set the float width used for newly created tensors ("float32"/"float64")."""
    global _DEFAULT_DTYPE
    dt = np.dtype(dtype)
    if dt not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise TrainingError(f"unsupported tensor dtype {dt}; use float32 or float64")
    _DEFAULT_DTYPE = dt.type


@contextlib.contextmanager
def precision(dtype):
    """Temporarily switch the default dtype, e.g. `with precision("float64"):`."""
    previous = _DEFAULT_DTYPE
    set_default_dtype(dtype)
    try:
        yield
    finally:
        set_default_dtype(previous)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    """Dense array node in the autodiff graph."""

    __slots__ = ("data", "requires_grad", "grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=default_dtype())
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._backward: Callable[[], None] | None = None
        self._parents: tuple[Tensor, ...] = ()

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple["Tensor", ...],
                 backward: Callable[[], None]) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = any(p.requires_grad for p in parents)
        out.grad = None
        out._parents = parents if out.requires_grad else ()
        out._backward = backward if out.requires_grad else None
        return out

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        out = Tensor.__new__(Tensor)
        out.data = self.data
        out.requires_grad = False
        out.grad = None
        out._parents = ()
        out._backward = None
        return out

    def _accumulate(self, grad: np.ndarray) -> None:
        # Accumulation never mutates in place, so sharing a child's grad
        # buffer (or a broadcast view) on first write is safe.
        if self.grad is None:
            self.grad = grad
        else:
            self.grad = self.grad + grad

    def backward(self) -> None:
        """Reverse pass from a scalar. Fills `.grad` on requires_grad tensors."""
        if self.size != 1:
            raise TrainingError(f"backward() needs a scalar loss, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen and parent.requires_grad:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- elementwise arithmetic -------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = _ensure_tensor(other)
        data = self.data + other.data
        out = Tensor._from_op(data, (self, other), None)

        def backward():
            if self.requires_grad:
                self._accumulate(_unbroadcast(out.grad, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(out.grad, other.shape))

        out._backward = backward if out.requires_grad else None
        return out

    def __mul__(self, other) -> "Tensor":
        other = _ensure_tensor(other)
        data = self.data * other.data
        out = Tensor._from_op(data, (self, other), None)

        def backward():
            if self.requires_grad:
                self._accumulate(_unbroadcast(out.grad * other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(out.grad * self.data, other.shape))

        out._backward = backward if out.requires_grad else None
        return out

    def __truediv__(self, other) -> "Tensor":
        other = _ensure_tensor(other)
        data = self.data / other.data
        out = Tensor._from_op(data, (self, other), None)

        def backward():
            if self.requires_grad:
                self._accumulate(_unbroadcast(out.grad / other.data, self.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(-out.grad * data / other.data, other.shape))

        out._backward = backward if out.requires_grad else None
        return out

    def __neg__(self) -> "Tensor":
        out = Tensor._from_op(-self.data, (self,), None)

        def backward():
            if self.requires_grad:
                self._accumulate(-out.grad)

        out._backward = backward if out.requires_grad else None
        return out

    def __sub__(self, other) -> "Tensor":
        return self + (-_ensure_tensor(other))

    def __radd__(self, other) -> "Tensor":
        return _ensure_tensor(other) + self

    def __rsub__(self, other) -> "Tensor":
        return _ensure_tensor(other) - self

    def __rmul__(self, other) -> "Tensor":
        return _ensure_tensor(other) * self

    def __rtruediv__(self, other) -> "Tensor":
        return _ensure_tensor(other) / self

    def __pow__(self, exponent) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise TrainingError("only scalar exponents are supported")
        data = self.data ** exponent
        out = Tensor._from_op(data, (self,), None)

        def backward():
            if self.requires_grad:
                self._accumulate(out.grad * exponent * self.data ** (exponent - 1))

        out._backward = backward if out.requires_grad else None
        return out

    # -- unary ops ---------------------------------------------------------

    def exp(self) -> "Tensor":
        data = np.exp(self.data)
        out = Tensor._from_op(data, (self,), None)

        def backward():
            if self.requires_grad:
                self._accumulate(out.grad * data)

        out._backward = backward if out.requires_grad else None
        return out

    def log(self) -> "Tensor":
        data = np.log(self.data)
        out = Tensor._from_op(data, (self,), None)

        def backward():
            if self.requires_grad:
                self._accumulate(out.grad / self.data)

        out._backward = backward if out.requires_grad else None
        return out

    def sqrt(self) -> "Tensor":
        data = np.sqrt(self.data)
        out = Tensor._from_op(data, (self,), None)

        def backward():
            if self.requires_grad:
                self._accumulate(out.grad * 0.5 / data)

        out._backward = backward if out.requires_grad else None
        return out

    def relu(self) -> "Tensor":
        data = np.maximum(self.data, 0)
        out = Tensor._from_op(data, (self,), None)

        def backward():
            if self.requires_grad:
                self._accumulate(out.grad * (self.data > 0))

        out._backward = backward if out.requires_grad else None
        return out

    # -- shape ops ----------------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        original = self.shape
        out = Tensor._from_op(self.data.reshape(shape), (self,), None)

        def backward():
            if self.requires_grad:
                self._accumulate(out.grad.reshape(original))

        out._backward = backward if out.requires_grad else None
        return out

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inverse = np.argsort(axes)
        out = Tensor._from_op(self.data.transpose(axes), (self,), None)

        def backward():
            if self.requires_grad:
                self._accumulate(out.grad.transpose(inverse))

        out._backward = backward if out.requires_grad else None
        return out

    def swapaxes(self, a: int, b: int) -> "Tensor":
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return self.transpose(tuple(axes))

    def broadcast_to(self, shape) -> "Tensor":
        shape = tuple(shape)
        original = self.shape
        out = Tensor._from_op(np.broadcast_to(self.data, shape), (self,), None)

        def backward():
            if self.requires_grad:
                self._accumulate(_unbroadcast(out.grad, original))

        out._backward = backward if out.requires_grad else None
        return out

    def __getitem__(self, index) -> "Tensor":
        data = self.data[index]
        if np.isscalar(data) or data.ndim == 0:
            data = np.asarray(data)
        out = Tensor._from_op(data, (self,), None)

        def backward():
            if self.requires_grad:
                grad = np.zeros_like(self.data)
                np.add.at(grad, index, out.grad)
                self._accumulate(grad)

        out._backward = backward if out.requires_grad else None
        return out

    # -- reductions ----------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        data = self.data.sum(axis=axis, keepdims=keepdims)
        out = Tensor._from_op(np.asarray(data), (self,), None)

        def backward():
            if self.requires_grad:
                grad = out.grad
                if axis is not None and not keepdims:
                    grad = np.expand_dims(grad, axis)
                self._accumulate(np.broadcast_to(grad, self.shape))

        out._backward = backward if out.requires_grad else None
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.size if axis is None else np.prod(
            [self.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))])
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- linear algebra --------------------------------------------------------

    def __matmul__(self, other) -> "Tensor":
        other = _ensure_tensor(other)
        if self.ndim < 2 or other.ndim < 2:
            raise DimensionError(
                f"matmul needs 2D+ operands, got {self.shape} x {other.shape}")
        if self.shape[-1] != other.shape[-2]:
            raise DimensionError(
                f"matmul inner extents disagree: {self.shape} x {other.shape}")
        data = self.data @ other.data
        out = Tensor._from_op(data, (self, other), None)

        def backward():
            if self.requires_grad:
                grad = out.grad @ other.data.swapaxes(-1, -2)
                self._accumulate(_unbroadcast(grad, self.shape))
            if other.requires_grad:
                grad = self.data.swapaxes(-1, -2) @ out.grad
                other._accumulate(_unbroadcast(grad, other.shape))

        out._backward = backward if out.requires_grad else None
        return out


def _ensure_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along `axis`; gradients split back to each input."""
    tensors = [_ensure_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = Tensor._from_op(data, tuple(tensors), None)
    extents = [t.shape[axis] for t in tensors]

    def backward():
        offset = 0
        index = [slice(None)] * data.ndim
        for t, extent in zip(tensors, extents):
            if t.requires_grad:
                index[axis] = slice(offset, offset + extent)
                t._accumulate(out.grad[tuple(index)])
            offset += extent

    out._backward = backward if out.requires_grad else None
    return out


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=default_dtype()))


class Parameter:
    """Named learnable (or frozen) tensor; names are unique paths like "atp.context"."""

    def __init__(self, name: str, value, trainable: bool = True):
        self.name = name
        self.tensor = Tensor(np.asarray(value, dtype=default_dtype()),
                             requires_grad=trainable)
        self.trainable = trainable

    @property
    def data(self) -> np.ndarray:
        return self.tensor.data

    @data.setter
    def data(self, value: np.ndarray) -> None:
        self.tensor.data = np.asarray(value, dtype=self.tensor.data.dtype)

    @property
    def grad(self) -> np.ndarray | None:
        return self.tensor.grad

    @property
    def shape(self) -> tuple:
        return self.tensor.shape

    def zero_grad(self) -> None:
        self.tensor.grad = None

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.shape}, trainable={self.trainable})"


def collect_parameters(groups: Iterable[Parameter]) -> dict[str, Parameter]:
    """Index parameters by name, enforcing unique paths."""
    by_name: dict[str, Parameter] = {}
    for p in groups:
        if p.name in by_name:
            raise TrainingError(f"duplicate parameter name {p.name!r}")
        by_name[p.name] = p
    return by_name
