from pathlib import Path

import numpy as np
from PIL import Image


def to_gray_levels(weights: np.ndarray) -> np.ndarray:
    """Scale non-negative weights so the largest maps to 255."""
    weights = np.asarray(weights, dtype=np.float64)
    peak = weights.max() if weights.size else 0.0
    if peak <= 0.0:
        return np.zeros(weights.shape, dtype=np.uint8)
    return np.rint(255.0 * weights / peak).astype(np.uint8)


def write_graymap(weights: np.ndarray, path) -> Path:
    """Binary PGM (P5) with one pixel per grid cell."""
    path = Path(path)
    Image.fromarray(to_gray_levels(weights)).save(path, format="PPM")
    return path


def read_graymap(path) -> np.ndarray:
    with Image.open(path) as image:
        return np.asarray(image.convert("L"))
