"""Caption decoder with word-guided attention and the gated semantic vector.

Ablations change what enters the decoder GRU next to the word embedding s_t:

    none_att  mean context region
    wa        ẑ_t
    wsa       ẑ_t, v'_I (gate fixed to 1)
    full      ẑ_t, g_t · v'_I
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from app.core.config import RunConfig
from app.core.errors import DomainError, ShapeError
from app.models.module import Embedding, GRUCell, Linear, Module, Parameter
from app.models.regions import RegionEncoder, RegionGrid
from app.models.semantic import SemanticAttention, SemanticAttentionOutput
from app.numeric import functions as F
from app.numeric import init
from app.numeric.tensor import Tensor, no_grad

START_ID = 0
END_ID = 1


@dataclass
class SceneEncoding:
    raw: RegionGrid
    context: RegionGrid
    semantic: Optional[SemanticAttentionOutput] = None
    mean_region: Optional[Tensor] = None

    @property
    def fused(self) -> Optional[Tensor]:
        return self.semantic.fused if self.semantic is not None else None


@dataclass
class DecoderStep:
    h: Tensor
    logits: Tensor
    alpha: Optional[Tensor]
    gate: Optional[float]


@dataclass
class TraceStep:
    token: int
    alpha: Optional[np.ndarray]
    gate: Optional[float]
    log_prob: float


@dataclass
class DecodeTrace:
    steps: list[TraceStep] = field(default_factory=list)


class Captioner(Module):
    def __init__(self, config: RunConfig, vocab_size: int, rng: np.random.Generator):
        self.ablation = config.ablation
        regions = config.regions
        D, c, h = config.feature_dim, config.concepts, config.hidden_dim
        self.regions = RegionEncoder(config.grid_size, config.grid_h, D, rng)
        if self.uses_semantic:
            self.semantic = SemanticAttention(D, c, config.attention_dim, rng, config.attention_variant)
        self.embedding = Embedding(vocab_size, h, rng)
        if self.uses_word_attention:
            self.w_a = Parameter(init.vector(D, rng))
            self.U_a = Parameter(init.matrix(regions, h, rng))
            self.b_a = Parameter(init.zeros(regions))
        if self.ablation == "full":
            self.w_g = Parameter(init.vector(h, rng))
            self.b_g = Parameter(init.zeros(1))
        width = h + D + (D + c if self.uses_semantic else 0)
        self.gru = GRUCell(width, h, rng)
        self.output = Linear(h, vocab_size, rng)

    @property
    def uses_semantic(self) -> bool:
        return self.ablation in ("wsa", "full")

    @property
    def uses_word_attention(self) -> bool:
        return self.ablation != "none_att"

    @property
    def vocab_size(self) -> int:
        return self.embedding.weight.shape[0]

    def encode(self, canvas, concept_matrix) -> SceneEncoding:
        raw, context = self.regions(canvas)
        encoding = SceneEncoding(raw, context)
        if self.uses_semantic:
            encoding.semantic = self.semantic(context.features, concept_matrix)
        if not self.uses_word_attention:
            encoding.mean_region = F.mean(context.features, axis=0)
        return encoding

    def embed_word(self, token_id: int) -> Tensor:
        return self.embedding(token_id)

    def word_attention(self, context, h_prev) -> tuple[Tensor, Tensor]:
        """α_t = softmax(tanh(v'_l w_a + U_a h + b_a)); ẑ_t = Σ_i α_ti v'_li."""
        scores = F.tanh(F.matmul(context, self.w_a) + F.matmul(self.U_a, h_prev) + self.b_a)
        alpha = F.softmax(scores)
        return alpha, F.matmul(alpha, context)

    def context_gate(self, h_prev, fused, override: Optional[float] = None) -> tuple[Tensor, Tensor]:
        """g_t = σ(w_gᵀ h + b_g); v'_t = g_t · v'_I."""
        if override is not None:
            gate = Tensor(np.array([float(override)]))
        elif self.ablation == "full":
            gate = F.sigmoid(F.matmul(self.w_g, h_prev) + self.b_g)
        else:
            gate = Tensor(np.ones(1))
        return gate, gate * fused

    def decode_step(self, s_t, z_t, v_t, h_prev) -> tuple[Tensor, Tensor]:
        """h_t = GRU([s_t; ẑ_t; v'_t], h_prev); p = softmax(W_o h_t + b_o)."""
        h, logits = self._advance([s_t, z_t] + ([v_t] if v_t is not None else []), h_prev)
        return h, F.softmax(logits)

    def _advance(self, parts: Sequence[Tensor], h_prev) -> tuple[Tensor, Tensor]:
        x = F.concat(parts)
        if x.shape != (self.gru.input_width,):
            raise ShapeError(f"decoder input width {x.shape[0]} does not match GRU input {self.gru.input_width}")
        h = self.gru(x, h_prev)
        return h, self.output(h)

    def initial_state(self) -> Tensor:
        return self.gru.initial_state()

    def step(self, token_id: int, encoding: SceneEncoding, h_prev, gate_override: Optional[float] = None) -> DecoderStep:
        context = encoding.context.features
        alpha = None
        if self.uses_word_attention:
            alpha, visual = self.word_attention(context, h_prev)
        else:
            visual = encoding.mean_region
        parts = [self.embed_word(token_id), visual]
        gate_value = None
        if self.uses_semantic:
            gate, v_t = self.context_gate(h_prev, encoding.fused, gate_override)
            parts.append(v_t)
            gate_value = float(gate.data[0])
        h, logits = self._advance(parts, h_prev)
        return DecoderStep(h, logits, alpha, gate_value)


def check_caption(caption: Sequence[int]) -> None:
    if len(caption) < 3:
        raise DomainError(f"empty caption {list(caption)}")
    if caption[0] != START_ID or caption[-1] != END_ID:
        raise DomainError(f"caption must start with the start token and end with the end token: {list(caption)}")


def caption_nll(model: Captioner, encoding: SceneEncoding, caption: Sequence[int], gate_override: Optional[float] = None) -> Tensor:
    """−Σ_t log p_t(w_t) for one caption, each step fed the gold previous word."""
    check_caption(caption)
    h = model.initial_state()
    terms = []
    for previous, target in zip(caption[:-1], caption[1:]):
        out = model.step(previous, encoding, h, gate_override)
        terms.append(F.log_softmax(out.logits)[target])
        h = out.h
    return -F.sum(F.stack(terms))


def caption_loss(model: Captioner, batch: Iterable[tuple[SceneEncoding, Sequence[Sequence[int]]]], gate_override: Optional[float] = None) -> Tensor:
    """L_C = −(1/N) Σ_i Σ_t log p_t(w_t^(i)), N = number of captions in the batch."""
    losses = []
    for encoding, captions in batch:
        for caption in captions:
            losses.append(caption_nll(model, encoding, caption, gate_override))
    if not losses:
        raise DomainError("caption loss needs at least one caption")
    return F.sum(F.stack(losses)) / len(losses)


def _trace_step(token: int, out: DecoderStep, log_prob: float) -> TraceStep:
    alpha = out.alpha.data.copy() if out.alpha is not None else None
    return TraceStep(token, alpha, out.gate, float(log_prob))


def greedy_decode(model: Captioner, encoding: SceneEncoding, max_len: int, gate_override: Optional[float] = None) -> tuple[list[int], DecodeTrace]:
    if max_len < 1:
        raise DomainError(f"max_len must be >= 1, got {max_len}")
    trace = DecodeTrace()
    tokens: list[int] = []
    with no_grad():
        h = model.initial_state()
        previous = START_ID
        for _ in range(max_len):
            out = model.step(previous, encoding, h, gate_override)
            log_probs = F.log_softmax(out.logits).data
            token = int(np.argmax(log_probs))
            trace.steps.append(_trace_step(token, out, log_probs[token]))
            if token == END_ID:
                break
            tokens.append(token)
            previous, h = token, out.h
    return tokens, trace



def teacher_forced_trace(model: Captioner, encoding: SceneEncoding, caption: Sequence[int], gate_override: Optional[float] = None) -> DecodeTrace:
    """One step per target word of a gold caption; each step records the gold word and its log-probability."""
    check_caption(caption)
    trace = DecodeTrace()
    with no_grad():
        h = model.initial_state()
        for previous, target in zip(caption[:-1], caption[1:]):
            out = model.step(previous, encoding, h, gate_override)
            trace.steps.append(_trace_step(target, out, F.log_softmax(out.logits).data[target]))
            h = out.h
    return trace


@dataclass
class _Hypothesis:
    tokens: list[int]
    h: Tensor
    score: float
    steps: list[TraceStep]


def beam_search(model: Captioner, encoding: SceneEncoding, beam_size: int, max_len: int, gate_override: Optional[float] = None) -> tuple[list[int], DecodeTrace]:
    """Summed log-probability beam search.

    Candidates are ranked by score, then beam index, then step log-probability,
    then token id, so a beam of one makes exactly the greedy choices.
    """
    if beam_size < 1 or max_len < 1:
        raise DomainError(f"beam_size and max_len must be >= 1, got {beam_size} and {max_len}")
    live = [_Hypothesis([], model.initial_state(), 0.0, [])]
    finished: list[_Hypothesis] = []
    with no_grad():
        for _ in range(max_len):
            candidates = []
            for index, hyp in enumerate(live):
                previous = hyp.tokens[-1] if hyp.tokens else START_ID
                out = model.step(previous, encoding, hyp.h, gate_override)
                log_probs = F.log_softmax(out.logits).data
                for token in range(log_probs.shape[0]):
                    candidates.append((hyp.score + log_probs[token], index, log_probs[token], token, out))
            candidates.sort(key=lambda c: (-c[0], c[1], -c[2], c[3]))
            survivors = []
            for score, index, log_prob, token, out in candidates[: beam_size - len(finished)]:
                parent = live[index]
                hyp = _Hypothesis(parent.tokens + [token], out.h, float(score), parent.steps + [_trace_step(token, out, log_prob)])
                (finished if token == END_ID else survivors).append(hyp)
            live = survivors
            if not live:
                break
    best = sorted(finished + live, key=lambda hyp: -hyp.score)[0]
    tokens = best.tokens[:-1] if best.tokens and best.tokens[-1] == END_ID else best.tokens
    return tokens, DecodeTrace(best.steps)


def generate(model: Captioner, encoding: SceneEncoding, mode: str = "greedy", max_len: int = 24, beam_size: int = 1, gate_override: Optional[float] = None) -> tuple[list[int], DecodeTrace]:
    if mode == "greedy":
        return greedy_decode(model, encoding, max_len, gate_override)
    if mode == "beam":
        return beam_search(model, encoding, beam_size, max_len, gate_override)
    raise ValueError(f"unknown decoding mode {mode!r}")
