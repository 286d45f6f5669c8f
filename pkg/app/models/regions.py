"""Region features: the flattened feature map and its bidirectional-GRU context."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.core.errors import ShapeError
from app.models.module import GRUCell, Module, PatchEncoder
from app.numeric import functions as F
from app.numeric.tensor import Tensor


@dataclass
class RegionGrid:
    features: Tensor  # C×D, one row per region
    stage: Literal["raw", "context"]

    @property
    def regions(self) -> int:
        return self.features.shape[0]

    @property
    def width(self) -> int:
        return self.features.shape[1]


def flatten_grid(feature_map) -> RegionGrid:
    """H×W×D map to C×D regions in row-major order."""
    if feature_map.ndim != 3 or min(feature_map.shape) < 1:
        raise ShapeError(f"feature map must be H×W×D with positive dims, got {tuple(feature_map.shape)}")
    height, width, depth = feature_map.shape
    return RegionGrid(F.reshape(feature_map, (height * width, depth)), "raw")


def bidirectional_encode(grid: RegionGrid, forward: GRUCell, backward: GRUCell) -> RegionGrid:
    """v'_li = forward hidden i + backward hidden i, both scans from zero state."""
    if forward.hidden_width != grid.width or backward.hidden_width != grid.width:
        raise ShapeError(
            f"GRU hidden widths {forward.hidden_width}/{backward.hidden_width} must equal region width {grid.width}"
        )
    ahead = forward.scan(grid.features)
    behind = backward.scan(grid.features, reverse=True)
    return RegionGrid(F.stack(ahead) + F.stack(behind), "context")


class RegionEncoder(Module):
    def __init__(self, grid_size: int, grid_h: int, feature_dim: int, rng: np.random.Generator):
        self.patches = PatchEncoder(grid_size, grid_h, feature_dim, rng)
        self.forward_gru = GRUCell(feature_dim, feature_dim, rng)
        self.backward_gru = GRUCell(feature_dim, feature_dim, rng)

    def __call__(self, canvas) -> tuple[RegionGrid, RegionGrid]:
        raw = flatten_grid(self.patches(canvas))
        return raw, bidirectional_encode(raw, self.forward_gru, self.backward_gru)
