"""Answer metrics: exact-match accuracy and WUPS over a small taxonomy."""
from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Optional, Sequence

from app.core.errors import DatasetFormatError, DomainError, VocabularyError

DEFAULT_TAXONOMY = Path(__file__).parent / "data" / "taxonomy.txt"
INDENT = 2


class Taxonomy:
    """Rooted tree over answer words; the root has depth 1."""

    def __init__(self, parents: dict[str, Optional[str]]):
        roots = [t for t, p in parents.items() if p is None]
        if len(roots) != 1:
            raise DomainError(f"taxonomy needs exactly one root, found {len(roots)}")
        self.parents = dict(parents)
        self.root = roots[0]
        self._depth: dict[str, int] = {}
        for token in self.parents:
            self._depth[token] = len(self.path(token))

    def __contains__(self, token: str) -> bool:
        return token in self.parents

    def path(self, token: str) -> list[str]:
        """Ancestors from `token` up to the root, inclusive."""
        if token not in self.parents:
            raise VocabularyError(f"token {token!r} is not in the taxonomy")
        chain = [token]
        while self.parents[chain[-1]] is not None:
            chain.append(self.parents[chain[-1]])
        return chain

    def depth(self, token: str) -> int:
        if token not in self._depth:
            raise VocabularyError(f"token {token!r} is not in the taxonomy")
        return self._depth[token]

    def lca(self, a: str, b: str) -> str:
        ancestors = set(self.path(a))
        return next(t for t in self.path(b) if t in ancestors)

    def wup(self, a: str, b: str) -> float:
        """Wu-Palmer similarity 2·depth(lca) / (depth(a) + depth(b))."""
        return 2.0 * self.depth(self.lca(a, b)) / (self.depth(a) + self.depth(b))


def parse_taxonomy(lines: Sequence[str], source="<taxonomy>") -> Taxonomy:
    parents: dict[str, Optional[str]] = {}
    stack: list[str] = []
    for number, raw in enumerate(lines, start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        token = line.lstrip(" ")
        indent = len(line) - len(token)
        if indent % INDENT or token != token.strip() or " " in token:
            raise DatasetFormatError(f"bad indentation or token {line!r}", source, number)
        level = indent // INDENT
        if level > len(stack) or (level == 0 and stack):
            raise DatasetFormatError(f"unexpected depth for {token!r}", source, number)
        if token in parents:
            raise DatasetFormatError(f"duplicate token {token!r}", source, number)
        del stack[level:]
        parents[token] = stack[-1] if stack else None
        stack.append(token)
    if not parents:
        raise DatasetFormatError("empty taxonomy", source)
    return Taxonomy(parents)


def load_taxonomy(path=None) -> Taxonomy:
    path = Path(path) if path else DEFAULT_TAXONOMY
    if not path.is_file():
        raise DatasetFormatError("taxonomy file not found", path)
    return parse_taxonomy(path.read_text(encoding="utf-8").splitlines(), source=path)


def _check_lengths(predictions: Sequence, golds: Sequence) -> None:
    if len(predictions) != len(golds):
        raise DomainError(f"{len(predictions)} predictions for {len(golds)} gold answers")
    if not golds:
        raise DomainError("no answers to score")


def accuracy(predictions: Sequence, golds: Sequence) -> float:
    _check_lengths(predictions, golds)
    return sum(p == g for p, g in zip(predictions, golds)) / len(golds)


def per_type_accuracy(predictions: Sequence, golds: Sequence, types: Sequence[str]) -> dict[str, tuple[float, int]]:
    """Accuracy and count per question type."""
    _check_lengths(predictions, golds)
    buckets: dict[str, list[bool]] = defaultdict(list)
    for p, g, t in zip(predictions, golds, types):
        buckets[t].append(p == g)
    return {t: (sum(hits) / len(hits), len(hits)) for t, hits in sorted(buckets.items())}


def wups(predictions: Sequence[str], golds: Sequence[str], taxonomy: Taxonomy, threshold: float) -> float:
    """Mean of s if s ≥ τ else 0.1·s over Wu-Palmer similarities s."""
    _check_lengths(predictions, golds)
    total = 0.0
    for p, g in zip(predictions, golds):
        s = taxonomy.wup(p, g)
        total += s if s >= threshold else 0.1 * s
    return total / len(golds)
