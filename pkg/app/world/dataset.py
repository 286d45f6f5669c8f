"""Dataset generation and the on-disk JSON-lines format.

A dataset directory holds `train.jsonl`, `test.jsonl`, `vocab.txt` and the
`world.env` generator settings. See docs/formats.md for the byte layout.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from pydantic import ValidationError

from app.core.config import QUESTION_TYPES, WorldConfig, load_config, write_key_value_file
from app.core.errors import ConfigError, DatasetFormatError, VocabularyError
from app.schemas.dataset import SampleRecord
from app.world.language import captions_for, question_for
from app.world.scenes import Scene, SceneObject, build_scene, generate_scene
from app.world.vocab import Vocabulary, build_vocab, read_vocab, write_vocab


logger = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
SEED_STRIDE = 1_000_003

TRAIN_FILE = "train.jsonl"
TEST_FILE = "test.jsonl"
VOCAB_FILE = "vocab.txt"
WORLD_FILE = "world.env"


@dataclass(frozen=True)
class QAPair:
    question: tuple[int, ...]
    answer: int
    qtype: str


@dataclass(eq=False)
class Sample:
    scene: Scene
    labels: tuple[int, ...]
    captions: list[list[int]]
    qa: list[QAPair]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Sample):
            return NotImplemented
        return (
            self.scene == other.scene
            and self.labels == other.labels
            and self.captions == other.captions
            and self.qa == other.qa
        )


def scene_seed(seed: int, index: int) -> int:
    return (seed * SEED_STRIDE + index) % 2**32


def question_type(index: int, shares: dict[str, float]) -> str:
    """Type of the `index`-th question; golden-ratio points keep frequencies close to `shares`."""
    u = ((index + 1) * GOLDEN) % 1.0
    cumulative = 0.0
    for qtype in QUESTION_TYPES:
        cumulative += shares[qtype]
        if u < cumulative:
            return qtype
    return next(t for t in reversed(QUESTION_TYPES) if shares[t] > 0)


def _describe(scene: Scene, index: int, config: WorldConfig):
    captions = captions_for(scene.objects, config.grid_h, config.captions_per_scene)
    rng = np.random.default_rng([scene.seed, 1])
    shares = config.question_shares()
    qa = []
    for k in range(config.questions_per_scene):
        qtype = question_type(index * config.questions_per_scene + k, shares)
        question, answer = question_for(qtype, scene.objects, config.grid_h, rng)
        qa.append((question, answer, qtype))
    return captions, qa


def _encode(scene: Scene, captions, qa, vocab: Vocabulary, strict: bool) -> Sample:
    caption_ids = [vocab.encode_caption(text, strict=strict) for text in captions]
    pairs = [QAPair(tuple(vocab.encode(q.split(), strict=strict)), vocab.answer_id(a), t) for q, a, t in qa]
    return Sample(scene, tuple(vocab.concept_labels(caption_ids)), caption_ids, pairs)


def generate_dataset(
    seed: int, n_train: int, n_test: int, config: Optional[WorldConfig] = None
) -> tuple[list[Sample], list[Sample], Vocabulary]:
    """Deterministic train/test splits plus the vocabulary built on the training captions."""
    config = config or WorldConfig()
    if n_train < 1 or n_test < 1:
        raise ConfigError(f"n_train and n_test must be >= 1, got {n_train} and {n_test}")
    described = []
    for index in range(n_train + n_test):
        scene = generate_scene(scene_seed(seed, index), config)
        described.append((scene, *_describe(scene, index, config)))

    train_raw = described[:n_train]
    vocab = build_vocab(
        [text.split() for _, captions, _ in train_raw for text in captions],
        config.min_count,
        config.concepts,
        questions=[q.split() for _, _, qa in train_raw for q, _, _ in qa],
    )
    # words outside the training vocabulary become <unk>
    samples = [_encode(scene, captions, qa, vocab, strict=False) for scene, captions, qa in described]
    logger.info("generated %d train / %d test samples, %d tokens, %d concepts", n_train, n_test, len(vocab), len(vocab.concepts))
    return samples[:n_train], samples[n_train:], vocab


def caption_texts(sample: Sample, vocab: Vocabulary) -> list[str]:
    return [" ".join(vocab.decode(c)) for c in sample.captions]


def sample_to_record(sample: Sample, vocab: Vocabulary) -> dict:
    scene = sample.scene
    return {
        "seed": scene.seed,
        "grid": [scene.grid_size, scene.grid_h, scene.grid_w],
        "objects": [
            {"shape": o.shape, "color": o.color, "size": o.size, "row": o.row, "col": o.col} for o in scene.objects
        ],
        "captions": caption_texts(sample, vocab),
        "qa": [
            {"question": " ".join(vocab.decode(p.question)), "answer": vocab.answers[p.answer], "type": p.qtype}
            for p in sample.qa
        ],
        "y": list(sample.labels),
    }


def write_samples(samples: Iterable[Sample], vocab: Vocabulary, path) -> None:
    lines = [json.dumps(sample_to_record(s, vocab), separators=(",", ":"), ensure_ascii=False) for s in samples]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def _field_name(error: dict) -> str:
    return ".".join(str(part) for part in error["loc"]) or "record"


def record_to_sample(record: SampleRecord, vocab: Vocabulary, path=None, line: Optional[int] = None) -> Sample:
    size, grid_h, grid_w = record.grid
    try:
        world = WorldConfig(grid_size=size, grid_h=grid_h, grid_w=grid_w, max_objects=min(4, grid_h * grid_w))
        objects = [SceneObject(o.shape, o.color, o.size, o.row, o.col) for o in record.objects]
        scene = build_scene(objects, world, seed=record.seed)
    except (ValidationError, ConfigError) as exc:
        raise DatasetFormatError(str(exc), path, line, "objects") from None

    captions = []
    for k, text in enumerate(record.captions):
        try:
            captions.append(vocab.encode_caption(text))
        except VocabularyError as exc:
            raise DatasetFormatError(str(exc), path, line, f"captions.{k}") from None
    if any(len(c) == 2 for c in captions):
        raise DatasetFormatError("empty caption", path, line, "captions")
    qa = []
    for k, item in enumerate(record.qa):
        try:
            qa.append(QAPair(tuple(vocab.encode(item.question.split())), vocab.answer_id(item.answer), item.type))
        except VocabularyError as exc:
            raise DatasetFormatError(str(exc), path, line, f"qa.{k}") from None

    expected = vocab.concept_labels(captions)
    if len(record.y) != len(expected):
        raise DatasetFormatError(f"expected {len(expected)} concept labels, got {len(record.y)}", path, line, "y")
    if list(record.y) != expected:
        raise DatasetFormatError("concept labels disagree with the captions", path, line, "y")
    return Sample(scene, tuple(expected), captions, qa)


def read_samples(path, vocab: Vocabulary) -> list[Sample]:
    path = Path(path)
    if not path.is_file():
        raise DatasetFormatError("dataset file not found", path)
    samples = []
    with path.open(encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            if not raw.strip():
                raise DatasetFormatError("blank line", path, number)
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"invalid JSON: {exc.msg}", path, number) from None
            try:
                record = SampleRecord.model_validate(payload)
            except ValidationError as exc:
                error = exc.errors()[0]
                raise DatasetFormatError(error["msg"], path, number, _field_name(error)) from None
            samples.append(record_to_sample(record, vocab, path, number))
    return samples


def save_dataset(directory, train: Sequence[Sample], test: Sequence[Sample], vocab: Vocabulary, config: Optional[WorldConfig] = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_vocab(vocab, directory / VOCAB_FILE)
    write_samples(train, vocab, directory / TRAIN_FILE)
    write_samples(test, vocab, directory / TEST_FILE)
    if config is not None:
        write_key_value_file(config, directory / WORLD_FILE)
    return directory


def load_dataset(directory) -> tuple[list[Sample], list[Sample], Vocabulary]:
    directory = Path(directory)
    vocab_path = directory / VOCAB_FILE
    if not vocab_path.is_file():
        raise DatasetFormatError("vocabulary file not found", vocab_path)
    vocab = read_vocab(vocab_path)
    return read_samples(directory / TRAIN_FILE, vocab), read_samples(directory / TEST_FILE, vocab), vocab


def load_world(directory) -> WorldConfig:
    path = Path(directory) / WORLD_FILE
    return load_config(WorldConfig, path if path.is_file() else None)
