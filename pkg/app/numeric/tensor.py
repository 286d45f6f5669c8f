"""Dense float64 tensors that record the operations applied to them.

A `Tensor` produced by a `Function` keeps a reference to that function, which
in turn keeps its input tensors; `backward` walks this graph in reverse
topological order and accumulates `.grad` on every tensor that requires it.
"""
from __future__ import annotations

import contextvars
from contextlib import contextmanager
from typing import Iterator, Optional

import numpy as np

from app.core.errors import ShapeError

_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar("grad_enabled", default=True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Run forward passes without recording a graph (inference)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


def is_grad_enabled() -> bool:
    return _grad_enabled.get()


class Tensor:
    # ndarray <op> Tensor must dispatch to the Tensor reflected operator
    __array_priority__ = 1000

    def __init__(self, data, requires_grad: bool = False, _ctx: Optional["Function"] = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._ctx = _ctx

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def T(self) -> "Tensor":
        from app.numeric import functions as F
        return F.transpose(self)

    def item(self) -> float:
        return float(self.data.reshape(()))

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def __len__(self) -> int:
        return self.shape[0]

    # arithmetic is routed through app.numeric.functions
    def __add__(self, other):
        from app.numeric import functions as F
        return F.add(self, other)

    def __radd__(self, other):
        from app.numeric import functions as F
        return F.add(other, self)

    def __sub__(self, other):
        from app.numeric import functions as F
        return F.add(self, F.neg(other))

    def __rsub__(self, other):
        from app.numeric import functions as F
        return F.add(other, F.neg(self))

    def __mul__(self, other):
        from app.numeric import functions as F
        return F.mul(self, other)

    def __rmul__(self, other):
        from app.numeric import functions as F
        return F.mul(other, self)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division is only defined by a constant")
        return self * (1.0 / np.asarray(other, dtype=np.float64))

    def __neg__(self):
        from app.numeric import functions as F
        return F.neg(self)

    def __matmul__(self, other):
        from app.numeric import functions as F
        return F.matmul(self, other)

    def __rmatmul__(self, other):
        from app.numeric import functions as F
        return F.matmul(other, self)

    def __getitem__(self, index):
        from app.numeric import functions as F
        return F.index(self, index)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        from app.numeric import functions as F
        return F.sum(self, axis=axis, keepdims=keepdims)

    def max(self, axis=None) -> "Tensor":
        from app.numeric import functions as F
        return F.max(self, axis=axis)

    def reshape(self, *shape) -> "Tensor":
        from app.numeric import functions as F
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return F.reshape(self, shape)


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


class Function:
    """One differentiable operation.

    Subclasses implement `forward` on raw arrays and `backward`, which maps the
    gradient of the output to one gradient (or None) per input.
    """

    def __init__(self):
        self.parents: tuple[Tensor, ...] = ()

    @classmethod
    def apply(cls, *inputs, **kwargs) -> Tensor:
        fn = cls()
        parents = tuple(as_tensor(x) for x in inputs)
        out = fn.forward(*(p.data for p in parents), **kwargs)
        if _grad_enabled.get() and any(p.requires_grad for p in parents):
            fn.parents = parents
            return Tensor(out, requires_grad=True, _ctx=fn)
        return Tensor(out)

    def forward(self, *arrays, **kwargs) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node._ctx is not None:
            for parent in reversed(node._ctx.parents):
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
    return order


def backward(root: Tensor) -> None:
    """Populate `.grad` on every requires_grad ancestor of a scalar `root`."""
    if root.ndim != 0:
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return
    order = _topological_order(root)
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        ctx = node._ctx
        if ctx is None or node.grad is None:
            continue
        grads = ctx.backward(node.grad)
        for parent, grad in zip(ctx.parents, grads):
            if grad is None or not parent.requires_grad:
                continue
            if grad.shape != parent.shape:
                raise ShapeError(
                    f"{type(ctx).__name__} produced gradient of shape {grad.shape} "
                    f"for input of shape {parent.shape}"
                )
            parent.grad = grad.copy() if parent.grad is None else parent.grad + grad
