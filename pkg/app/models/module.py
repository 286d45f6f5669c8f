"""Parameter containers and the small layers every model is assembled from."""
from __future__ import annotations

from typing import Iterator, Mapping, Optional

import numpy as np

from app.core.errors import CheckpointError, ShapeError, VocabularyError
from app.numeric import functions as F
from app.numeric import init
from app.numeric.tensor import Tensor


class Parameter(Tensor):
    def __init__(self, data):
        super().__init__(data, requires_grad=True)


class Module:
    """Holds Parameters and sub-Modules as attributes.

    Traversal follows attribute assignment order, so parameter names and
    their order are a deterministic function of the constructor.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def freeze(self) -> None:
        for p in self.parameters():
            p.requires_grad = False

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: Mapping[str, np.ndarray], strict: bool = True) -> None:
        own = dict(self.named_parameters())
        if strict:
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            if missing or unexpected:
                raise CheckpointError(f"parameter mismatch: missing {missing}, unexpected {unexpected}")
        for name, value in state.items():
            if name not in own:
                continue
            value = np.asarray(value, dtype=np.float64)
            if value.shape != own[name].shape:
                raise CheckpointError(f"parameter {name}: expected shape {own[name].shape}, got {value.shape}")
            own[name].data = value.copy()


class Linear(Module):
    """y = W x + b with W of shape out×in; 2-D inputs are in×n column stacks."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(init.matrix(out_features, in_features, rng))
        self.bias = Parameter(init.zeros(out_features)) if bias else None

    def __call__(self, x) -> Tensor:
        out = F.matmul(self.weight, x)
        if self.bias is None:
            return out
        return F.column_add(out, self.bias) if out.ndim == 2 else out + self.bias


class Embedding(Module):
    def __init__(self, count: int, width: int, rng: np.random.Generator):
        self.weight = Parameter(init.matrix(count, width, rng))

    def __call__(self, token_id: int) -> Tensor:
        count = self.weight.shape[0]
        if not 0 <= token_id < count:
            raise VocabularyError(f"token id {token_id} outside embedding of size {count}")
        return self.weight[int(token_id)]


class GRUCell(Module):
    """z = σ(W_z x + U_z h + b_z), r = σ(W_r x + U_r h + b_r),
    h̃ = tanh(W_h x + U_h (r ⊙ h) + b_h), h' = (1 − z) ⊙ h + z ⊙ h̃.
    """

    def __init__(self, input_width: int, hidden_width: int, rng: np.random.Generator):
        self.input_width = input_width
        self.hidden_width = hidden_width
        self.W_z = Parameter(init.matrix(hidden_width, input_width, rng))
        self.U_z = Parameter(init.matrix(hidden_width, hidden_width, rng))
        self.b_z = Parameter(init.zeros(hidden_width))
        self.W_r = Parameter(init.matrix(hidden_width, input_width, rng))
        self.U_r = Parameter(init.matrix(hidden_width, hidden_width, rng))
        self.b_r = Parameter(init.zeros(hidden_width))
        self.W_h = Parameter(init.matrix(hidden_width, input_width, rng))
        self.U_h = Parameter(init.matrix(hidden_width, hidden_width, rng))
        self.b_h = Parameter(init.zeros(hidden_width))

    def initial_state(self) -> Tensor:
        return Tensor(np.zeros(self.hidden_width))

    def project_inputs(self, xs) -> tuple[Tensor, Tensor, Tensor]:
        """Input terms W x for a whole n×in sequence at once (n×hidden each)."""
        if xs.ndim != 2 or xs.shape[1] != self.input_width:
            raise ShapeError(f"gru: input sequence shape {xs.shape} does not match input width {self.input_width}")
        return (F.matmul(xs, self.W_z.T), F.matmul(xs, self.W_r.T), F.matmul(xs, self.W_h.T))

    def step(self, xz, xr, xh, h_prev) -> Tensor:
        z = F.sigmoid(xz + F.matmul(self.U_z, h_prev) + self.b_z)
        r = F.sigmoid(xr + F.matmul(self.U_r, h_prev) + self.b_r)
        candidate = F.tanh(xh + F.matmul(self.U_h, r * h_prev) + self.b_h)
        return (1.0 - z) * h_prev + z * candidate

    def __call__(self, x, h_prev) -> Tensor:
        if x.shape != (self.input_width,):
            raise ShapeError(f"gru: input shape {x.shape} does not match input width {self.input_width}")
        if h_prev.shape != (self.hidden_width,):
            raise ShapeError(f"gru: hidden shape {h_prev.shape} does not match hidden width {self.hidden_width}")
        return self.step(
            F.matmul(self.W_z, x), F.matmul(self.W_r, x), F.matmul(self.W_h, x), h_prev
        )

    def scan(self, xs, reverse: bool = False, h0: Optional[Tensor] = None) -> list[Tensor]:
        """Hidden states for every row of `xs`, in row order whichever way the scan runs."""
        xz, xr, xh = self.project_inputs(xs)
        h = h0 if h0 is not None else self.initial_state()
        order = range(xs.shape[0] - 1, -1, -1) if reverse else range(xs.shape[0])
        states: list[Optional[Tensor]] = [None] * xs.shape[0]
        for i in order:
            h = self.step(xz[i], xr[i], xh[i], h)
            states[i] = h
        return states


def gru_cell(x, h_prev, params: GRUCell) -> Tensor:
    return params(x, h_prev)


class ConvEncoder(Module):
    """conv3×3 → tanh → avg-pool 2 → conv3×3 → tanh → avg-pool down to H×W×D."""

    def __init__(self, grid_size: int, grid_h: int, feature_dim: int, rng: np.random.Generator, channels: int = 3):
        self.grid_size = grid_size
        self.channels = channels
        self.final_pool = grid_size // (2 * grid_h)
        hidden = max(1, feature_dim // 2)
        self.conv1_weight = Parameter(init.kernel(3, channels, hidden, rng))
        self.conv1_bias = Parameter(init.zeros(hidden))
        self.conv2_weight = Parameter(init.kernel(3, hidden, feature_dim, rng))
        self.conv2_bias = Parameter(init.zeros(feature_dim))

    def __call__(self, canvas) -> Tensor:
        expected = (self.grid_size, self.grid_size, self.channels)
        if tuple(canvas.shape) != expected:
            raise ShapeError(f"scene tensor shape {tuple(canvas.shape)} does not match {expected}")
        x = F.avg_pool2d(F.tanh(F.conv2d(canvas, self.conv1_weight, self.conv1_bias)), 2)
        return F.avg_pool2d(F.tanh(F.conv2d(x, self.conv2_weight, self.conv2_bias)), self.final_pool)


def _dense_map(layer: Linear, x) -> Tensor:
    """tanh(layer) applied to the channel vector of every cell of an H×W×C map."""
    rows, cols, channels = x.shape
    flat = F.reshape(x, (rows * cols, channels))
    out = F.tanh(layer(flat.T))  # out×(rows·cols)
    return F.reshape(out.T, (rows, cols, out.shape[0]))


class PatchEncoder(Module):
    """2×2 pixel blocks → tanh, then the blocks of each grid cell → tanh, giving H×W×D.

    No weight crosses a cell boundary, so region (r, c) depends only on the
    pixels of grid cell (r, c).
    """

    def __init__(self, grid_size: int, grid_h: int, feature_dim: int, rng: np.random.Generator, channels: int = 3):
        self.grid_size = grid_size
        self.channels = channels
        self.cell_blocks = grid_size // (2 * grid_h)
        hidden = max(1, feature_dim // 2)
        self.block = Linear(4 * channels, hidden, rng)
        self.cell = Linear(self.cell_blocks * self.cell_blocks * hidden, feature_dim, rng)

    def __call__(self, canvas) -> Tensor:
        expected = (self.grid_size, self.grid_size, self.channels)
        if tuple(canvas.shape) != expected:
            raise ShapeError(f"scene tensor shape {tuple(canvas.shape)} does not match {expected}")
        blocks = _dense_map(self.block, F.space_to_depth(canvas, 2))
        return _dense_map(self.cell, F.space_to_depth(blocks, self.cell_blocks))
