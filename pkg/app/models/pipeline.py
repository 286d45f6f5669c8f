"""A concept predictor plus one task head, bound to a vocabulary and run config."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Literal, Optional, Sequence, Union

import numpy as np

from app.core.config import RunConfig
from app.core.errors import ConfigError, TaskMismatchError
from app.models.captioner import Captioner, DecodeTrace, SceneEncoding, generate
from app.models.concepts import ConceptPredictor, concept_set, top_concepts
from app.models.module import Parameter
from app.models.vqa import VqaEncoding, VqaModel, VqaOutput
from app.numeric.tensor import Tensor, no_grad
from app.world.vocab import Vocabulary


@dataclass
class AttentionRecord:
    """Normalised weights over regions or concepts, tagged with where they came from."""

    mechanism: Literal["semantic_regions", "semantic_concepts", "word", "question"]
    weights: np.ndarray
    step: Optional[int] = None
    labels: list[str] = field(default_factory=list)


@dataclass
class ConceptState:
    probabilities: np.ndarray
    matrix: np.ndarray
    threshold: float


class ScenePipeline:
    def __init__(self, config: RunConfig, vocab: Vocabulary):
        if len(vocab.concepts) != config.concepts:
            raise ConfigError(f"config expects {config.concepts} concepts, vocabulary has {len(vocab.concepts)}")
        if config.answers is not None and config.answers != len(vocab.answers):
            raise ConfigError(f"config expects {config.answers} answers, vocabulary has {len(vocab.answers)}")
        self.config = config
        self.vocab = vocab
        rng = np.random.default_rng(config.seed)
        self.concepts = ConceptPredictor(config.grid_size, config.grid_h, config.grid_w, config.feature_dim, config.concepts, rng)
        self.model: Union[Captioner, VqaModel]
        if config.task == "caption":
            self.model = Captioner(config, len(vocab), rng)
        else:
            self.model = VqaModel(config, len(vocab), len(vocab.answers), rng)

    @property
    def task(self) -> str:
        return self.config.task

    def named_parameters(self) -> Iterator[tuple[str, Parameter]]:
        yield from self.concepts.named_parameters("concepts.")
        yield from self.model.named_parameters("model.")

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state) -> None:
        self.concepts.load_state_dict({k[len("concepts."):]: v for k, v in state.items() if k.startswith("concepts.")})
        self.model.load_state_dict({k[len("model."):]: v for k, v in state.items() if k.startswith("model.")})

    def require(self, task: str) -> None:
        if self.task != task:
            raise TaskMismatchError(f"this is a {self.task} model, not a {task} model")

    def concept_state(self, canvas) -> ConceptState:
        """v_I from the frozen predictor and the thresholded concept set."""
        with no_grad():
            probabilities = self.concepts(canvas).data.copy()
        return ConceptState(probabilities, concept_set(probabilities, self.config.threshold), self.config.threshold)

    def encode(self, canvas, state: Optional[ConceptState] = None) -> Union[SceneEncoding, VqaEncoding]:
        state = state or self.concept_state(canvas)
        matrix = Tensor(state.matrix)
        if isinstance(self.model, Captioner):
            return self.model.encode(canvas, matrix)
        return self.model.encode(canvas, matrix, Tensor(state.probabilities))

    def top_concepts(self, state: ConceptState, k: int = 5) -> list[tuple[str, float]]:
        return top_concepts(state.probabilities, self.vocab.concepts, k)

    def caption(self, canvas, beam_size: Optional[int] = None, gate_override: Optional[float] = None) -> tuple[list[str], DecodeTrace, SceneEncoding]:
        self.require("caption")
        beam_size = beam_size or self.config.beam_size
        with no_grad():
            encoding = self.encode(canvas)
            mode = "greedy" if beam_size == 1 else "beam"
            tokens, trace = generate(self.model, encoding, mode, self.config.max_caption_len, beam_size, gate_override)
        return self.vocab.decode(tokens), trace, encoding

    def answer(self, canvas, question: Sequence[str]) -> tuple[str, VqaOutput, VqaEncoding]:
        self.require("vqa")
        ids = self.vocab.encode(question)
        with no_grad():
            encoding = self.encode(canvas)
            output = self.model(encoding, ids)
        return self.vocab.answers[output.predicted], output, encoding

    def semantic_records(self, encoding) -> list[AttentionRecord]:
        if encoding.semantic is None:
            return []
        return [
            AttentionRecord("semantic_regions", encoding.semantic.alpha_l.data.copy()),
            AttentionRecord("semantic_concepts", encoding.semantic.alpha_c.data.copy(), labels=list(self.vocab.concepts)),
        ]

    def word_records(self, trace: DecodeTrace) -> list[AttentionRecord]:
        return [
            AttentionRecord("word", step.alpha, step=t, labels=[self.vocab.tokens[step.token]])
            for t, step in enumerate(trace.steps)
            if step.alpha is not None
        ]
