from typing import Callable, Sequence

import numpy as np

from app.core.config import RunConfig
from app.numeric.tensor import Tensor


def gradcheck(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    points: int = 20,
    eps: float = 1e-5,
    rel_tol: float = 1e-4,
    abs_tol: float = 1e-8,
    seed: int = 0,
) -> float:
    """Compare analytic gradients with central differences at random entries.

    Returns the worst relative error seen; fails the test on any mismatch.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(points):
        k = int(rng.integers(len(params)))
        p = params[k]
        idx = tuple(int(rng.integers(n)) for n in p.shape)
        original = p.data[idx]
        p.data[idx] = original + eps
        plus = loss_fn().item()
        p.data[idx] = original - eps
        minus = loss_fn().item()
        p.data[idx] = original
        numeric = (plus - minus) / (2 * eps)
        a = analytic[k][idx]
        diff = abs(a - numeric)
        if diff <= abs_tol:
            continue
        rel = diff / max(abs(a), abs(numeric))
        worst = max(worst, rel)
        assert rel < rel_tol, f"param {k} at {idx}: analytic {a!r} numeric {numeric!r} (rel {rel:.2e})"
    return worst


def small_config(**overrides) -> RunConfig:
    values = dict(
        grid_size=8,
        grid_h=2,
        grid_w=2,
        feature_dim=4,
        concepts=6,
        attention_dim=3,
        hidden_dim=5,
        question_dim=4,
        joint_dim=3,
        epochs=1,
        concept_epochs=1,
        batch_size=4,
        max_caption_len=12,
    )
    values.update(overrides)
    return RunConfig(**values)


def jitter(params: Sequence[Tensor], seed: int = 0, scale: float = 0.3) -> None:
    """Perturb parameters in place so zero biases do not leave tied maxima."""
    rng = np.random.default_rng(seed)
    for p in params:
        p.data = p.data + rng.normal(scale=scale, size=p.shape)
