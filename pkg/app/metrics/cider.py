"""CIDEr: tf-idf cosine similarity per n-gram order, averaged and scaled by 10."""
from __future__ import annotations

import math
from collections import Counter

from nltk.util import ngrams as _ngrams

from app.metrics.corpus import EvalCorpus

MAX_ORDER = 4


def ngrams(tokens, order: int) -> Counter:
    return Counter(_ngrams(tokens, order))


def document_frequency(corpus: EvalCorpus, order: int) -> Counter:
    """Number of corpus items whose references contain each n-gram."""
    df: Counter = Counter()
    for item in corpus:
        df.update({g for reference in item.references for g in ngrams(reference, order)})
    return df


def _tfidf(counts: Counter, df: Counter, items: int) -> dict:
    # log((N + 1) / df) keeps a single-item corpus informative
    return {g: n * math.log((items + 1) / max(1, df[g])) for g, n in counts.items()}


def _cosine(a: dict, b: dict) -> float:
    norm_a = math.sqrt(sum(v * v for v in a.values()))
    norm_b = math.sqrt(sum(v * v for v in b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return sum(v * b.get(g, 0.0) for g, v in a.items()) / (norm_a * norm_b)


def cider_scores(corpus: EvalCorpus) -> list[float]:
    items = len(corpus)
    frequencies = [document_frequency(corpus, order) for order in range(1, MAX_ORDER + 1)]
    scores = []
    for item in corpus:
        per_order = []
        for order, df in enumerate(frequencies, start=1):
            candidate = _tfidf(ngrams(item.candidate, order), df, items)
            similarities = [_cosine(candidate, _tfidf(ngrams(r, order), df, items)) for r in item.references]
            per_order.append(sum(similarities) / len(similarities))
        scores.append(10.0 * sum(per_order) / MAX_ORDER)
    return scores


def cider(corpus: EvalCorpus) -> float:
    scores = cider_scores(corpus)
    return sum(scores) / len(scores)
