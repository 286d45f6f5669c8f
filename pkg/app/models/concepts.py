"""Multi-label concept prediction, its loss and the thresholded concept set."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from app.core.errors import DomainError, ShapeError
from app.models.module import ConvEncoder, Linear, Module
from app.numeric import functions as F
from app.numeric.tensor import Tensor, as_tensor


class ConceptPredictor(Module):
    def __init__(self, grid_size: int, grid_h: int, grid_w: int, feature_dim: int, concepts: int, rng: np.random.Generator):
        self.conv = ConvEncoder(grid_size, grid_h, feature_dim, rng)
        self.head = Linear(grid_h * grid_w * feature_dim, concepts, rng)

    def logits(self, canvas) -> Tensor:
        features = self.conv(canvas)
        return self.head(F.reshape(features, (features.size,)))

    def __call__(self, canvas) -> Tensor:
        return F.sigmoid(self.logits(canvas))


def predict_concepts(canvas, params: ConceptPredictor) -> Tensor:
    return params(canvas)


def _check_batch(values: Tensor, labels: np.ndarray) -> None:
    if values.shape != labels.shape:
        raise ShapeError(f"multilabel loss: prediction shape {values.shape} and label shape {labels.shape} differ")
    if values.ndim != 2 or values.shape[0] == 0:
        raise ShapeError(f"multilabel loss expects an N×c batch, got shape {values.shape}")
    if not np.isin(labels, (0.0, 1.0)).all():
        raise DomainError("concept labels must be 0 or 1")


def multilabel_loss(probabilities, labels) -> Tensor:
    """L_M = −(1/N) Σ_i Σ_j [y log v + (1−y) log(1−v)] over an N×c batch."""
    probabilities = as_tensor(probabilities)
    labels = np.asarray(labels, dtype=np.float64)
    _check_batch(probabilities, labels)
    data = probabilities.data
    if not ((data > 0.0) & (data < 1.0)).all():
        raise DomainError("concept probabilities must lie strictly inside (0, 1)")
    per_entry = labels * F.log(probabilities) + (1.0 - labels) * F.log(1.0 - probabilities)
    return -F.sum(per_entry) / labels.shape[0]


def multilabel_loss_from_logits(logits, labels) -> Tensor:
    """Same loss on logits: softplus(l) − y·l avoids log(0) at saturation."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.float64)
    _check_batch(logits, labels)
    return F.sum(F.softplus(logits) - labels * logits) / labels.shape[0]


def concept_set(probabilities, threshold: float) -> np.ndarray:
    """c×c matrix whose column i is e_i when v_Ii ≥ ε, else zero."""
    if not 0.0 < threshold < 1.0:
        raise DomainError(f"threshold must lie in (0, 1), got {threshold}")
    values = probabilities.data if isinstance(probabilities, Tensor) else np.asarray(probabilities, dtype=np.float64)
    return np.diag((values >= threshold).astype(np.float64))


def top_concepts(probabilities, words: Sequence[str], k: int) -> list[tuple[str, float]]:
    values = probabilities.data if isinstance(probabilities, Tensor) else np.asarray(probabilities, dtype=np.float64)
    order = sorted(range(len(values)), key=lambda i: (-values[i], i))
    return [(words[i], float(values[i])) for i in order[:k]]
