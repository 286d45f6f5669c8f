"""Toy scenes: up to four coloured shapes on a black G×G canvas.

The canvas is split into an H×W grid of cells; every object occupies one cell
and is drawn from a 4×4 stencil scaled up to the cell size.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from app.core.config import WorldConfig
from app.core.errors import ConfigError
from app.world.language import COLORS, SHAPES, SIZES

RGB = {
    "red": (1.0, 0.0, 0.0),
    "green": (0.0, 1.0, 0.0),
    "blue": (0.0, 0.0, 1.0),
    "yellow": (1.0, 1.0, 0.0),
    "brown": (0.6, 0.3, 0.1),
}


def _stencil(rows: str) -> np.ndarray:
    return np.array([[float(ch) for ch in row] for row in rows.split("/")])


STENCILS = {
    ("large", "square"): _stencil("1111/1111/1111/1111"),
    ("large", "circle"): _stencil("0110/1111/1111/0110"),
    ("large", "triangle"): _stencil("0110/0110/1111/1111"),
    ("small", "square"): _stencil("0000/0110/0110/0000"),
    ("small", "circle"): _stencil("0100/1110/0100/0000"),
    ("small", "triangle"): _stencil("0000/0100/1110/0000"),
}

KINDS = tuple((size, shape) for size in SIZES for shape in SHAPES)


@dataclass(frozen=True)
class SceneObject:
    shape: str
    color: str
    size: str
    row: int
    col: int

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigError(f"unknown shape {self.shape!r}")
        if self.color not in COLORS:
            raise ConfigError(f"unknown color {self.color!r}")
        if self.size not in SIZES:
            raise ConfigError(f"unknown size {self.size!r}")

    def cell(self, grid_w: int) -> int:
        """Row-major region index of the object's cell."""
        return self.row * grid_w + self.col


@dataclass(eq=False)
class Scene:
    canvas: np.ndarray
    objects: tuple[SceneObject, ...]
    seed: int
    grid_size: int
    grid_h: int
    grid_w: int

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scene):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.objects == other.objects
            and (self.grid_size, self.grid_h, self.grid_w) == (other.grid_size, other.grid_h, other.grid_w)
            and np.array_equal(self.canvas, other.canvas)
        )


def render(objects: Iterable[SceneObject], grid_size: int, grid_h: int, grid_w: int) -> np.ndarray:
    cell = grid_size // grid_h
    scale = np.ones((cell // 4, cell // 4))
    canvas = np.zeros((grid_size, grid_size, 3))
    for obj in objects:
        mask = np.kron(STENCILS[(obj.size, obj.shape)], scale)
        top, left = obj.row * cell, obj.col * cell
        patch = canvas[top:top + cell, left:left + cell]
        patch[mask > 0] = RGB[obj.color]
    return canvas


def build_scene(objects: Sequence[SceneObject], config: WorldConfig, seed: int = 0) -> Scene:
    """Validate explicit objects and render them (objects are kept in reading order)."""
    if not 1 <= len(objects) <= config.max_objects:
        raise ConfigError(f"a scene holds 1..{config.max_objects} objects, got {len(objects)}")
    seen = set()
    for obj in objects:
        if not (0 <= obj.row < config.grid_h and 0 <= obj.col < config.grid_w):
            raise ConfigError(f"object cell ({obj.row}, {obj.col}) outside the {config.grid_h}x{config.grid_w} grid")
        if (obj.row, obj.col) in seen:
            raise ConfigError(f"two objects share cell ({obj.row}, {obj.col})")
        seen.add((obj.row, obj.col))
    ordered = tuple(sorted(objects, key=lambda o: (o.row, o.col)))
    canvas = render(ordered, config.grid_size, config.grid_h, config.grid_w)
    return Scene(canvas, ordered, seed, config.grid_size, config.grid_h, config.grid_w)


def generate_scene(seed: int, config: WorldConfig, rng: Optional[np.random.Generator] = None) -> Scene:
    """Random scene: distinct cells, distinct colours, distinct (size, shape) pairs."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    count = int(rng.integers(config.min_objects, config.max_objects + 1))
    cells = rng.choice(config.grid_h * config.grid_w, size=count, replace=False)
    colors = rng.choice(len(COLORS), size=count, replace=False)
    kinds = rng.choice(len(KINDS), size=count, replace=False)
    objects = []
    for cell, color, kind in zip(cells, colors, kinds):
        size, shape = KINDS[int(kind)]
        row, col = divmod(int(cell), config.grid_w)
        objects.append(SceneObject(shape, COLORS[int(color)], size, row, col))
    return build_scene(objects, config, seed=seed)
