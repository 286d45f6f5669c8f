"""Question answering head: question GRU, question-guided attention and the joint layer.

Ablations:

    none_att  [mean region; v_I] in place of v'_I, [v_q; 0] in place of v'_lq
    qa        question-guided attention only (no W v'_I term)
    sa        v'_I with v'_lq = [v_q; 0]
    full      v'_I and v'_lq
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from app.core.config import RunConfig
from app.core.errors import DomainError, ShapeError
from app.models.module import Embedding, GRUCell, Module, Parameter
from app.models.regions import RegionEncoder, RegionGrid
from app.models.semantic import SemanticAttention, SemanticAttentionOutput
from app.numeric import functions as F
from app.numeric import init
from app.numeric.tensor import Tensor, as_tensor


@dataclass
class VqaEncoding:
    raw: RegionGrid
    context: RegionGrid
    visual: Optional[Tensor]  # v'_I, or its none_att stand-in; None for qa
    semantic: Optional[SemanticAttentionOutput] = None


@dataclass
class VqaOutput:
    alpha: Optional[Tensor]
    v_lq: Optional[Tensor]
    v_prime_lq: Tensor
    log_probs: Tensor

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_probs.data)

    @property
    def predicted(self) -> int:
        return int(np.argmax(self.log_probs.data))


class VqaModel(Module):
    def __init__(self, config: RunConfig, vocab_size: int, answers: int, rng: np.random.Generator):
        self.ablation = config.ablation
        D, c, q, joint = config.feature_dim, config.concepts, config.question_dim, config.joint_dim
        self.regions = RegionEncoder(config.grid_size, config.grid_h, D, rng)
        if self.uses_semantic:
            self.semantic = SemanticAttention(D, c, config.attention_dim, rng, config.attention_variant)
        self.embedding = Embedding(vocab_size, q, rng)
        self.question_gru = GRUCell(q, q, rng)
        if self.uses_question_attention:
            self.W_q = Parameter(init.matrix(joint, q, rng))
            self.W_l = Parameter(init.matrix(joint, D, rng))
        if self.ablation != "qa":
            self.W = Parameter(init.matrix(answers, D + c, rng))
        self.U = Parameter(init.matrix(answers, q + D, rng))
        self.b = Parameter(init.zeros(answers))

    @property
    def uses_semantic(self) -> bool:
        return self.ablation in ("sa", "full")

    @property
    def uses_question_attention(self) -> bool:
        return self.ablation in ("qa", "full")

    @property
    def answers(self) -> int:
        return self.b.shape[0]

    def encode(self, canvas, concept_matrix, concept_probs) -> VqaEncoding:
        raw, context = self.regions(canvas)
        encoding = VqaEncoding(raw, context, None)
        if self.uses_semantic:
            encoding.semantic = self.semantic(context.features, concept_matrix)
            encoding.visual = encoding.semantic.fused
        elif self.ablation == "none_att":
            encoding.visual = F.concat([F.mean(context.features, axis=0), as_tensor(concept_probs)])
        return encoding

    def encode_question(self, token_ids: Sequence[int]) -> Tensor:
        """v_q: last hidden state of the question GRU, zero initial state."""
        if len(token_ids) == 0:
            raise DomainError("empty question")
        words = F.stack([self.embedding(t) for t in token_ids])
        return self.question_gru.scan(words)[-1]

    def question_attention(self, v_q, context) -> tuple[Tensor, Tensor, Tensor]:
        """α_i ∝ exp(σ(⟨W_q v_q, W_l v'_li⟩)); v_lq = Σ α_i v'_li; v'_lq = [v_q; v_lq]."""
        query = F.matmul(self.W_q, v_q)
        keys = F.matmul(self.W_l, context.T)  # h'×C
        alpha = F.softmax(F.sigmoid(F.matmul(query, keys)))
        v_lq = F.matmul(alpha, context)
        return alpha, v_lq, F.concat([v_q, v_lq])

    def answer_logits(self, visual, v_prime_lq) -> Tensor:
        """u = tanh(W v'_I + U v'_lq + b)."""
        if v_prime_lq.shape != (self.U.shape[1],):
            raise ShapeError(f"joint layer: v'_lq {v_prime_lq.shape} does not match U {self.U.shape}")
        pre = F.matmul(self.U, v_prime_lq) + self.b
        if visual is not None and self.ablation != "qa":
            if visual.shape != (self.W.shape[1],):
                raise ShapeError(f"joint layer: v'_I {visual.shape} does not match W {self.W.shape}")
            pre = pre + F.matmul(self.W, visual)
        return F.tanh(pre)

    def answer_distribution(self, visual, v_prime_lq) -> Tensor:
        return F.softmax(self.answer_logits(visual, v_prime_lq))

    def __call__(self, encoding: VqaEncoding, token_ids: Sequence[int]) -> VqaOutput:
        v_q = self.encode_question(token_ids)
        context = encoding.context.features
        if self.uses_question_attention:
            alpha, v_lq, v_prime_lq = self.question_attention(v_q, context)
        else:
            alpha, v_lq = None, None
            v_prime_lq = F.concat([v_q, Tensor(np.zeros(context.shape[1]))])
        return VqaOutput(alpha, v_lq, v_prime_lq, F.log_softmax(self.answer_logits(encoding.visual, v_prime_lq)))


def vqa_loss(model: VqaModel, batch: Iterable[tuple[VqaEncoding, Sequence[int], int]]) -> Tensor:
    """L_A = −(1/N) Σ_i log P_a^(i)[gold_i]."""
    terms = []
    for encoding, question, gold in batch:
        if not 0 <= gold < model.answers:
            raise DomainError(f"gold answer id {gold} outside {model.answers} answer classes")
        terms.append(model(encoding, question).log_probs[gold])
    if not terms:
        raise DomainError("vqa loss needs at least one question")
    return -F.sum(F.stack(terms)) / len(terms)
