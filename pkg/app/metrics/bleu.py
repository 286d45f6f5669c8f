"""Corpus-level cumulative BLEU without smoothing, on top of nltk's scorer."""
from __future__ import annotations

from nltk.translate.bleu_score import corpus_bleu
from nltk.translate.bleu_score import modified_precision as sentence_precision

from app.core.errors import DomainError
from app.metrics.corpus import EvalCorpus


def modified_precision(corpus: EvalCorpus, order: int) -> tuple[int, int]:
    """Clipped n-gram matches and candidate n-gram total, summed over the corpus.

    A candidate shorter than `order` still adds one to the total.
    """
    clipped = total = 0
    for item in corpus:
        p = sentence_precision(list(item.references), item.candidate, order)
        clipped += p.numerator
        total += p.denominator
    return clipped, total


def bleu(corpus: EvalCorpus, n: int = 4) -> float:
    """exp(mean_k log p_k) · BP for k = 1..n; any order without a clipped match gives 0."""
    if not 1 <= n <= 4:
        raise DomainError(f"BLEU order must be between 1 and 4, got {n}")
    if any(modified_precision(corpus, order)[0] == 0 for order in range(1, n + 1)):
        return 0.0
    return float(corpus_bleu(
        [list(item.references) for item in corpus],
        [list(item.candidate) for item in corpus],
        weights=(1.0 / n,) * n,
    ))
