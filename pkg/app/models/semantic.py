"""Semantic-guided attention between context regions and the concept set.

Regions are held as a C×D matrix (one row per region); the projections work on
its transpose so every weight matrix keeps the out×in orientation and biases
are added column-wise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from app.core.errors import ShapeError
from app.models.module import Module, Parameter
from app.numeric import functions as F
from app.numeric import init
from app.numeric.tensor import Tensor, as_tensor

AttentionVariant = Literal["softmax", "as_printed"]


@dataclass
class SemanticAttentionOutput:
    P: Tensor  # C×c
    P_prime: Tensor  # c×C
    alpha_l: Tensor
    alpha_c: Tensor
    v_hat_l: Tensor
    v_hat_c: Tensor
    fused: Tensor


class SemanticAttention(Module):
    def __init__(self, feature_dim: int, concepts: int, attention_dim: int, rng: np.random.Generator, variant: AttentionVariant = "softmax"):
        self.variant = variant
        self.W_l = Parameter(init.matrix(attention_dim, feature_dim, rng))
        self.b_l = Parameter(init.zeros(attention_dim))
        self.W_c = Parameter(init.matrix(attention_dim, concepts, rng))
        self.b_c = Parameter(init.zeros(attention_dim))
        self.Wp_c = Parameter(init.matrix(attention_dim, concepts, rng))
        self.bp_c = Parameter(init.zeros(attention_dim))
        self.Wp_l = Parameter(init.matrix(attention_dim, feature_dim, rng))
        self.bp_l = Parameter(init.zeros(attention_dim))

    def __call__(self, context, concept_matrix) -> SemanticAttentionOutput:
        context = as_tensor(context)
        concept_matrix = as_tensor(concept_matrix)
        P, P_prime = similarity_matrices(context, concept_matrix, self)
        alpha_l = attention_weights(P, self.variant)
        alpha_c = attention_weights(P_prime, self.variant)
        v_hat_l, v_hat_c = attended_representations(alpha_l, context, alpha_c, concept_matrix)
        return SemanticAttentionOutput(P, P_prime, alpha_l, alpha_c, v_hat_l, v_hat_c, fuse(v_hat_l, v_hat_c))


def similarity_matrices(context, concept_matrix, params: SemanticAttention) -> tuple[Tensor, Tensor]:
    """P = (W_l v'_l ⊕ b_l)ᵀ(W_c v_c ⊕ b_c) and P' = (W'_c v_c ⊕ b'_c)ᵀ(W'_l v'_l ⊕ b'_l)."""
    context = as_tensor(context)
    concept_matrix = as_tensor(concept_matrix)
    c = params.W_c.shape[1]
    if context.ndim != 2 or context.shape[1] != params.W_l.shape[1]:
        raise ShapeError(f"similarity: regions {context.shape} do not match W_l {params.W_l.shape}")
    if concept_matrix.shape != (c, c):
        raise ShapeError(f"similarity: concept set {concept_matrix.shape} does not match W_c {params.W_c.shape}")
    columns = context.T  # D×C
    regions_l = F.column_add(F.matmul(params.W_l, columns), params.b_l)
    concepts_c = F.column_add(F.matmul(params.W_c, concept_matrix), params.b_c)
    concepts_p = F.column_add(F.matmul(params.Wp_c, concept_matrix), params.bp_c)
    regions_p = F.column_add(F.matmul(params.Wp_l, columns), params.bp_l)
    return F.matmul(regions_l.T, concepts_c), F.matmul(concepts_p.T, regions_p)


def attention_weights(scores, variant: AttentionVariant = "softmax") -> Tensor:
    """Softmax over the row maxima of `scores`.

    `as_printed` keeps the unnormalised exp(max_j S_ij) / exp(Σ_k S_ik).
    """
    scores = as_tensor(scores)
    if scores.ndim != 2 or 0 in scores.shape:
        raise ShapeError(f"attention scores must be a non-empty matrix, got {scores.shape}")
    row_max = F.max(scores, axis=1)
    if variant == "softmax":
        return F.softmax(row_max)
    if variant == "as_printed":
        return F.exp(row_max - F.sum(scores, axis=1))
    raise ValueError(f"unknown attention variant {variant!r}")


def attended_representations(alpha_l, context, alpha_c, concept_matrix) -> tuple[Tensor, Tensor]:
    context = as_tensor(context)
    concept_matrix = as_tensor(concept_matrix)
    if alpha_l.shape != (context.shape[0],) or alpha_c.shape != (concept_matrix.shape[1],):
        raise ShapeError(
            f"attended: weights {alpha_l.shape}/{alpha_c.shape} do not match {context.shape[0]} regions "
            f"and {concept_matrix.shape[1]} concepts"
        )
    return F.matmul(alpha_l, context), F.matmul(concept_matrix, alpha_c)


def fuse(v_hat_l, v_hat_c) -> Tensor:
    """v'_I = [v̂_l ; v̂_c]."""
    return F.concat([v_hat_l, v_hat_c])
