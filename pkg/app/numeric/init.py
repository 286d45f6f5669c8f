import math

import numpy as np


def glorot_uniform(shape: tuple[int, ...], rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out))."""
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return glorot_uniform((rows, cols), rng, fan_in=cols, fan_out=rows)


def vector(width: int, rng: np.random.Generator) -> np.ndarray:
    # weight vectors (w_a, w_g) are treated as 1×width matrices
    return glorot_uniform((width,), rng, fan_in=width, fan_out=1)


def kernel(size: int, channels_in: int, channels_out: int, rng: np.random.Generator) -> np.ndarray:
    return glorot_uniform(
        (size, size, channels_in, channels_out),
        rng,
        fan_in=size * size * channels_in,
        fan_out=size * size * channels_out,
    )


def zeros(*shape: int) -> np.ndarray:
    return np.zeros(shape)
