"""Differentiable operations on `Tensor`.

Every operation is a `Function` subclass with an explicit backward rule plus a
lower-case wrapper. `tensor_algebra` dispatches by op-code for callers that
select the operation at runtime.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from app.core.errors import ShapeError
from app.numeric.tensor import Function, Tensor, as_tensor


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _logistic(x: np.ndarray) -> np.ndarray:
    # exp(-|x|) never overflows; negative inputs keep their tiny positive value
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _broadcast_shape(name: str, a: np.ndarray, b: np.ndarray) -> tuple[int, ...]:
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{name}: incompatible shapes {a.shape} and {b.shape}") from None


class Add(Function):
    def forward(self, x, y):
        _broadcast_shape("add", x, y)
        self.shapes = (x.shape, y.shape)
        return x + y

    def backward(self, grad):
        return _unbroadcast(grad, self.shapes[0]), _unbroadcast(grad, self.shapes[1])


class Mul(Function):
    def forward(self, x, y):
        _broadcast_shape("mul", x, y)
        self.x, self.y = x, y
        return x * y

    def backward(self, grad):
        return _unbroadcast(grad * self.y, self.x.shape), _unbroadcast(grad * self.x, self.y.shape)


class Neg(Function):
    def forward(self, x):
        return -x

    def backward(self, grad):
        return (-grad,)


class MatMul(Function):
    def forward(self, x, y):
        if x.ndim not in (1, 2) or y.ndim not in (1, 2) or x.shape[-1] != y.shape[0]:
            raise ShapeError(f"matmul: incompatible shapes {x.shape} and {y.shape}")
        self.x, self.y = x, y
        return x @ y

    def backward(self, grad):
        x, y = self.x, self.y
        if x.ndim == 2 and y.ndim == 2:
            return grad @ y.T, x.T @ grad
        if x.ndim == 2:
            return np.outer(grad, y), x.T @ grad
        if y.ndim == 2:
            return y @ grad, np.outer(x, grad)
        return grad * y, grad * x


class ColumnAdd(Function):
    """Matrix ⊕ vector: the vector is added to every column of the matrix."""

    def forward(self, m, v):
        if m.ndim != 2 or v.ndim != 1 or m.shape[0] != v.shape[0]:
            raise ShapeError(f"column_add: incompatible shapes {m.shape} and {v.shape}")
        return m + v[:, None]

    def backward(self, grad):
        return grad, grad.sum(axis=1)


class Tanh(Function):
    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out ** 2),)


class Sigmoid(Function):
    def forward(self, x):
        self.out = _logistic(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Exp(Function):
    def forward(self, x):
        self.out = np.exp(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out,)


class Log(Function):
    def forward(self, x):
        self.x = x
        return np.log(x)

    def backward(self, grad):
        return (grad / self.x,)


class Softplus(Function):
    """log(1 + exp(x)) evaluated without overflow."""

    def forward(self, x):
        self.x = x
        return np.logaddexp(0.0, x)

    def backward(self, grad):
        return (grad * _logistic(self.x),)


def _check_axis(name: str, x: np.ndarray, axis: Optional[int]) -> None:
    if axis is None:
        if x.size == 0:
            raise ShapeError(f"{name} over an empty tensor of shape {x.shape}")
        return
    if x.ndim == 0 or not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"{name}: axis {axis} out of range for shape {x.shape}")
    if x.shape[axis] == 0:
        raise ShapeError(f"{name} over an empty axis {axis} of shape {x.shape}")


class Sum(Function):
    def forward(self, x, axis=None, keepdims=False):
        self.shape, self.axis, self.keepdims = x.shape, axis, keepdims
        return np.sum(x, axis=axis, keepdims=keepdims)

    def backward(self, grad):
        if self.axis is not None and not self.keepdims:
            grad = np.expand_dims(grad, self.axis)
        return (np.broadcast_to(grad, self.shape).copy(),)


class Max(Function):
    """Maximum over one axis (or all); the gradient goes to the first maximiser."""

    def forward(self, x, axis=None):
        _check_axis("max", x, axis)
        self.axis = axis
        mask = np.zeros_like(x)
        if axis is None:
            mask.flat[np.argmax(x)] = 1.0
        else:
            np.put_along_axis(mask, np.expand_dims(np.argmax(x, axis=axis), axis), 1.0, axis=axis)
        self.mask = mask
        return np.max(x, axis=axis)

    def backward(self, grad):
        if self.axis is not None:
            grad = np.expand_dims(grad, self.axis)
        return (self.mask * grad,)


class Softmax(Function):
    def forward(self, x, axis=-1):
        _check_axis("softmax", x, axis)
        self.axis = axis
        shifted = np.exp(x - x.max(axis=axis, keepdims=True))
        self.out = shifted / shifted.sum(axis=axis, keepdims=True)
        return self.out

    def backward(self, grad):
        s = self.out
        return (s * (grad - (grad * s).sum(axis=self.axis, keepdims=True)),)


class LogSoftmax(Function):
    def forward(self, x, axis=-1):
        _check_axis("log_softmax", x, axis)
        self.axis = axis
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        self.probs = np.exp(out)
        return out

    def backward(self, grad):
        return (grad - self.probs * grad.sum(axis=self.axis, keepdims=True),)


class Reshape(Function):
    def forward(self, x, shape=()):
        self.shape = x.shape
        try:
            return np.reshape(x, shape)
        except ValueError:
            raise ShapeError(f"reshape: cannot reshape {x.shape} into {tuple(shape)}") from None

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Transpose(Function):
    def forward(self, x, axes=None):
        self.axes = axes
        return np.transpose(x, axes)

    def backward(self, grad):
        if self.axes is None:
            return (np.transpose(grad),)
        return (np.transpose(grad, np.argsort(self.axes)),)


class Index(Function):
    def forward(self, x, index=None):
        self.shape, self.index = x.shape, index
        try:
            return np.array(x[index])
        except IndexError as exc:
            raise ShapeError(f"index {index!r} invalid for shape {x.shape}: {exc}") from None

    def backward(self, grad):
        full = np.zeros(self.shape)
        np.add.at(full, self.index, grad)
        return (full,)


class Concat(Function):
    def forward(self, *arrays, axis=0):
        try:
            out = np.concatenate(arrays, axis=axis)
        except ValueError:
            shapes = " and ".join(str(a.shape) for a in arrays)
            raise ShapeError(f"concat: incompatible shapes {shapes} along axis {axis}") from None
        self.axis = axis
        self.offsets = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return out

    def backward(self, grad):
        return tuple(np.split(grad, self.offsets, axis=self.axis))


class Stack(Function):
    def forward(self, *arrays, axis=0):
        try:
            out = np.stack(arrays, axis=axis)
        except ValueError:
            shapes = " and ".join(str(a.shape) for a in arrays)
            raise ShapeError(f"stack: incompatible shapes {shapes}") from None
        self.axis = axis
        return out

    def backward(self, grad):
        return tuple(np.moveaxis(grad, self.axis, 0))


class Conv2d(Function):
    """Same-padded, stride-1 convolution over an H×W×C_in map.

    Weights are k×k×C_in×C_out (k odd), bias C_out. Implemented as an
    im2col matrix product.
    """

    def forward(self, x, w, b):
        if (
            x.ndim != 3
            or w.ndim != 4
            or w.shape[0] != w.shape[1]
            or w.shape[0] % 2 == 0
            or w.shape[2] != x.shape[2]
            or b.shape != (w.shape[3],)
        ):
            raise ShapeError(f"conv2d: incompatible shapes {x.shape}, {w.shape} and {b.shape}")
        k = w.shape[0]
        pad = k // 2
        height, width, channels = x.shape
        padded = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
        # (H, W, C_in, k, k)
        windows = sliding_window_view(padded, (k, k), axis=(0, 1))
        cols = windows.reshape(height * width, channels * k * k)
        kernel = w.transpose(2, 0, 1, 3).reshape(channels * k * k, w.shape[3])
        self.x_shape, self.w_shape, self.cols, self.kernel = x.shape, w.shape, cols, kernel
        return (cols @ kernel + b).reshape(height, width, w.shape[3])

    def backward(self, grad):
        height, width, channels = self.x_shape
        k = self.w_shape[0]
        pad = k // 2
        g = grad.reshape(height * width, -1)
        grad_w = (self.cols.T @ g).reshape(channels, k, k, -1).transpose(1, 2, 0, 3)
        grad_b = g.sum(axis=0)
        grad_cols = (g @ self.kernel.T).reshape(height, width, channels, k, k)
        grad_padded = np.zeros((height + 2 * pad, width + 2 * pad, channels))
        for i in range(k):
            for j in range(k):
                grad_padded[i:i + height, j:j + width, :] += grad_cols[:, :, :, i, j]
        return grad_padded[pad:pad + height, pad:pad + width, :], grad_w, grad_b


class AvgPool2d(Function):
    def forward(self, x, size=2):
        if x.ndim != 3 or x.shape[0] % size or x.shape[1] % size:
            raise ShapeError(f"avg_pool2d: shape {x.shape} not divisible by pool size {size}")
        self.size = size
        height, width, channels = x.shape
        return x.reshape(height // size, size, width // size, size, channels).mean(axis=(1, 3))

    def backward(self, grad):
        s = self.size
        return (np.repeat(np.repeat(grad, s, axis=0), s, axis=1) / (s * s),)


def add(x, y) -> Tensor:
    return Add.apply(x, y)


def mul(x, y) -> Tensor:
    return Mul.apply(x, y)


def neg(x) -> Tensor:
    return Neg.apply(x)


def sub(x, y) -> Tensor:
    return Add.apply(x, Neg.apply(y))


def matmul(x, y) -> Tensor:
    return MatMul.apply(x, y)


def column_add(m, v) -> Tensor:
    return ColumnAdd.apply(m, v)


def tanh(x) -> Tensor:
    return Tanh.apply(x)


def sigmoid(x) -> Tensor:
    return Sigmoid.apply(x)


def exp(x) -> Tensor:
    return Exp.apply(x)


def log(x) -> Tensor:
    return Log.apply(x)


def softplus(x) -> Tensor:
    return Softplus.apply(x)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    return Sum.apply(x, axis=axis, keepdims=keepdims)


def mean(x, axis=None) -> Tensor:
    x = as_tensor(x)
    count = x.size if axis is None else x.shape[axis]
    return Sum.apply(x, axis=axis) * (1.0 / count)


def max(x, axis=None) -> Tensor:  # noqa: A001
    return Max.apply(x, axis=axis)


def softmax(x, axis: int = -1) -> Tensor:
    return Softmax.apply(x, axis=axis)


def log_softmax(x, axis: int = -1) -> Tensor:
    return LogSoftmax.apply(x, axis=axis)


def reshape(x, shape) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def transpose(x, axes=None) -> Tensor:
    return Transpose.apply(x, axes=axes)


def index(x, idx) -> Tensor:
    return Index.apply(x, index=idx)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    return Stack.apply(*tensors, axis=axis)


def conv2d(x, w, b) -> Tensor:
    return Conv2d.apply(x, w, b)


def avg_pool2d(x, size: int = 2) -> Tensor:
    return AvgPool2d.apply(x, size=size)


def space_to_depth(x, size: int) -> Tensor:
    """H×W×C map to (H/size)×(W/size)×(size·size·C); each output cell holds one size×size block."""
    x = as_tensor(x)
    if x.ndim != 3 or size < 1 or x.shape[0] % size or x.shape[1] % size:
        raise ShapeError(f"space_to_depth: cannot cut {x.shape} into {size}×{size} blocks")
    rows, cols, channels = x.shape
    blocks = reshape(x, (rows // size, size, cols // size, size, channels))
    return reshape(transpose(blocks, (0, 2, 1, 3, 4)), (rows // size, cols // size, size * size * channels))


OPS = {
    "matmul": matmul,
    "column_add": column_add,
    "add": add,
    "mul": mul,
    "sub": sub,
    "neg": neg,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "exp": exp,
    "log": log,
    "softplus": softplus,
    "concat": lambda *xs, axis=0: concat(xs, axis=axis),
    "stack": lambda *xs, axis=0: stack(xs, axis=axis),
    "max": max,
    "sum": sum,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "reshape": reshape,
    "transpose": transpose,
    "conv2d": conv2d,
    "avg_pool2d": avg_pool2d,
    "space_to_depth": space_to_depth,
}


def tensor_algebra(op_code: str, *operands, **kwargs) -> Tensor:
    """Apply the operation named `op_code` (see `OPS`) to the operands."""
    try:
        op = OPS[op_code]
    except KeyError:
        raise ValueError(f"unknown op-code {op_code!r}; expected one of {sorted(OPS)}") from None
    return op(*operands, **kwargs)
