"""Token vocabulary, concept subset and answer classes."""
from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

from app.core.errors import DatasetFormatError, VocabularyError
from app.world.language import ANSWER_CLASSES, END, PAD, SPECIAL_TOKENS, START, STOPWORDS, UNKNOWN

TOKENS_HEADER = "# tokens"
CONCEPTS_HEADER = "# concepts"
ANSWERS_HEADER = "# answers"


class Vocabulary:
    def __init__(self, tokens: Sequence[str], concepts: Sequence[str], answers: Sequence[str]):
        if tuple(tokens[: len(SPECIAL_TOKENS)]) != SPECIAL_TOKENS:
            raise VocabularyError(f"vocabulary must start with {SPECIAL_TOKENS}")
        if len(set(tokens)) != len(tokens):
            raise VocabularyError("duplicate token in vocabulary")
        self.tokens = list(tokens)
        self.index = {token: i for i, token in enumerate(self.tokens)}
        missing = [w for w in concepts if w not in self.index]
        if missing:
            raise VocabularyError(f"concept word(s) not in vocabulary: {', '.join(missing)}")
        if len(set(answers)) != len(answers) or len(answers) < 2:
            raise VocabularyError("answer classes must be at least two distinct words")
        self.concepts = list(concepts)
        self.concept_ids = [self.index[w] for w in self.concepts]
        self.answers = list(answers)
        self.answer_index = {a: i for i, a in enumerate(self.answers)}

    start_id = 0
    end_id = 1
    unknown_id = 2
    pad_id = 3

    def __len__(self) -> int:
        return len(self.tokens)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return (self.tokens, self.concepts, self.answers) == (other.tokens, other.concepts, other.answers)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, words: Iterable[str], strict: bool = True) -> list[int]:
        ids = []
        for word in words:
            if word in self.index:
                ids.append(self.index[word])
            elif strict:
                raise VocabularyError(f"token {word!r} is not in the vocabulary")
            else:
                ids.append(self.unknown_id)
        return ids

    def encode_caption(self, text: str, strict: bool = True) -> list[int]:
        return [self.start_id, *self.encode(text.split(), strict=strict), self.end_id]

    def decode(self, ids: Iterable[int]) -> list[str]:
        words = []
        for i in ids:
            if not 0 <= i < len(self.tokens):
                raise VocabularyError(f"token id {i} outside vocabulary of size {len(self.tokens)}")
            if i in (self.start_id, self.end_id, self.pad_id):
                continue
            words.append(self.tokens[i])
        return words

    def answer_id(self, answer: str) -> int:
        try:
            return self.answer_index[answer]
        except KeyError:
            raise VocabularyError(f"answer {answer!r} is not an answer class") from None

    def concept_labels(self, captions: Iterable[Sequence[int]]) -> list[int]:
        """y_j = 1 iff concept j occurs in at least one caption."""
        present = set()
        for caption in captions:
            present.update(caption)
        return [int(i in present) for i in self.concept_ids]


def build_vocab(
    captions: Iterable[Sequence[str]],
    min_count: int,
    c: int,
    questions: Iterable[Sequence[str]] = (),
    answers: Sequence[str] = ANSWER_CLASSES,
) -> Vocabulary:
    """Tokens ranked by frequency (ties lexicographic); concepts are the top-c caption words."""
    if min_count < 1:
        raise VocabularyError(f"min_count must be >= 1, got {min_count}")
    caption_counts: Counter[str] = Counter()
    for words in captions:
        caption_counts.update(words)
    counts = Counter(caption_counts)
    for words in questions:
        counts.update(words)

    ranked = sorted((w for w, n in counts.items() if n >= min_count and w not in SPECIAL_TOKENS), key=lambda w: (-counts[w], w))
    eligible = sorted(
        (w for w, n in caption_counts.items() if n >= min_count and w not in STOPWORDS and w not in SPECIAL_TOKENS),
        key=lambda w: (-caption_counts[w], w),
    )
    if c > len(eligible):
        raise VocabularyError(f"requested {c} concepts but only {len(eligible)} eligible caption words")
    return Vocabulary([*SPECIAL_TOKENS, *ranked], eligible[:c], answers)


def write_vocab(vocab: Vocabulary, path) -> None:
    lines = [TOKENS_HEADER, *vocab.tokens, CONCEPTS_HEADER, *vocab.concepts, ANSWERS_HEADER, *vocab.answers]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_vocab(lines: Sequence[str], source="<vocab>") -> Vocabulary:
    sections: dict[str, list[str]] = {}
    current = None
    for number, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if line in (TOKENS_HEADER, CONCEPTS_HEADER, ANSWERS_HEADER):
            if line in sections:
                raise DatasetFormatError(f"duplicate section {line!r}", source, number)
            current = line
            sections[current] = []
            continue
        if current is None:
            raise DatasetFormatError(f"expected {TOKENS_HEADER!r} before tokens", source, number)
        if not line or line != line.strip():
            raise DatasetFormatError(f"blank or padded token {line!r}", source, number)
        sections[current].append(line)
    for header in (TOKENS_HEADER, CONCEPTS_HEADER, ANSWERS_HEADER):
        if header not in sections:
            raise DatasetFormatError(f"missing section {header!r}", source)
    try:
        return Vocabulary(sections[TOKENS_HEADER], sections[CONCEPTS_HEADER], sections[ANSWERS_HEADER])
    except VocabularyError as exc:
        raise DatasetFormatError(str(exc), source) from None


def read_vocab(path) -> Vocabulary:
    path = Path(path)
    return parse_vocab(path.read_text(encoding="utf-8").splitlines(), source=path)


__all__ = ["Vocabulary", "build_vocab", "write_vocab", "read_vocab", "parse_vocab", "START", "END", "UNKNOWN", "PAD"]
