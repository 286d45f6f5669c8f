"""Evaluation corpora: candidate token sequences with their references."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from pydantic import ValidationError

from app.core.errors import DatasetFormatError, DomainError
from app.schemas.dataset import EvalRecord


@dataclass(frozen=True)
class EvalItem:
    candidate: tuple[str, ...]
    references: tuple[tuple[str, ...], ...]


class EvalCorpus:
    def __init__(self, items: Iterable[EvalItem]):
        self.items = list(items)
        if not self.items:
            raise DomainError("evaluation corpus is empty")
        for k, item in enumerate(self.items):
            if not item.references:
                raise DomainError(f"corpus item {k} has no reference")

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @classmethod
    def from_texts(cls, pairs: Iterable[tuple[str, Sequence[str]]]) -> "EvalCorpus":
        """Whitespace tokenisation of (candidate, references) strings."""
        return cls(
            EvalItem(tuple(candidate.split()), tuple(tuple(r.split()) for r in references))
            for candidate, references in pairs
        )


def read_eval_corpus(path) -> EvalCorpus:
    path = Path(path)
    if not path.is_file():
        raise DatasetFormatError("evaluation file not found", path)
    pairs = []
    with path.open(encoding="utf-8") as handle:
        for number, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                record = EvalRecord.model_validate(json.loads(raw))
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"invalid JSON: {exc.msg}", path, number) from None
            except ValidationError as exc:
                error = exc.errors()[0]
                field = ".".join(str(p) for p in error["loc"]) or "record"
                raise DatasetFormatError(error["msg"], path, number, field) from None
            pairs.append((record.candidate, record.references))
    if not pairs:
        raise DatasetFormatError("no records", path)
    return EvalCorpus.from_texts(pairs)
