"""Metric reports for trained pipelines and the attention localisation check."""
from __future__ import annotations

import logging
from typing import Optional, Sequence, Union

import numpy as np

from app.core.config import settings
from app.core.errors import TaskMismatchError
from app.metrics.answers import Taxonomy, accuracy, load_taxonomy, per_type_accuracy, wups
from app.metrics.bleu import bleu
from app.metrics.cider import cider
from app.metrics.corpus import EvalCorpus, EvalItem
from app.models.captioner import caption_nll, teacher_forced_trace
from app.models.pipeline import ScenePipeline
from app.numeric.tensor import no_grad
from app.schemas.reports import CaptionReport, TypeAccuracy, VqaReport
from app.training.checkpoint import load_pipeline
from app.world.dataset import Sample, caption_texts, load_dataset

logger = logging.getLogger(__name__)


def caption_corpus(pipeline: ScenePipeline, samples: Sequence[Sample]) -> EvalCorpus:
    items = []
    for sample in samples:
        words, _, _ = pipeline.caption(sample.scene.canvas)
        references = tuple(tuple(text.split()) for text in caption_texts(sample, pipeline.vocab))
        items.append(EvalItem(tuple(words), references))
    return EvalCorpus(items)


def exact_match_rate(corpus: EvalCorpus) -> float:
    return sum(item.candidate in item.references for item in corpus) / len(corpus)


def evaluate_captions(pipeline: ScenePipeline, samples: Sequence[Sample]) -> CaptionReport:
    pipeline.require("caption")
    corpus = caption_corpus(pipeline, samples)
    return CaptionReport(
        samples=len(corpus),
        bleu_1=bleu(corpus, 1),
        bleu_2=bleu(corpus, 2),
        bleu_3=bleu(corpus, 3),
        bleu_4=bleu(corpus, 4),
        cider=cider(corpus),
        exact_match=exact_match_rate(corpus),
    )


def evaluate_answers(pipeline: ScenePipeline, samples: Sequence[Sample], taxonomy: Optional[Taxonomy] = None) -> VqaReport:
    pipeline.require("vqa")
    taxonomy = taxonomy or load_taxonomy(settings.TAXONOMY_PATH)
    predictions, golds, types = [], [], []
    for sample in samples:
        encoding = pipeline.encode(sample.scene.canvas)
        for qa in sample.qa:
            output = pipeline.model(encoding, qa.question)
            predictions.append(pipeline.vocab.answers[output.predicted])
            golds.append(pipeline.vocab.answers[qa.answer])
            types.append(qa.qtype)
    if not golds:
        raise TaskMismatchError("dataset has no questions to answer")
    return VqaReport(
        questions=len(golds),
        accuracy=accuracy(predictions, golds),
        per_type={t: TypeAccuracy(accuracy=a, count=n) for t, (a, n) in per_type_accuracy(predictions, golds, types).items()},
        wups_0_9=wups(predictions, golds, taxonomy, 0.9),
        wups_0_0=wups(predictions, golds, taxonomy, 0.0),
    )


def evaluate(pipeline: ScenePipeline, samples: Sequence[Sample], taxonomy: Optional[Taxonomy] = None) -> Union[CaptionReport, VqaReport]:
    with no_grad():
        if pipeline.task == "caption":
            report = evaluate_captions(pipeline, samples)
        else:
            report = evaluate_answers(pipeline, samples, taxonomy)
    logger.info("evaluated %s on %d samples: %s", pipeline.task, len(samples), report.model_dump_json())
    return report


def evaluate_checkpoint(checkpoint, dataset_dir, split: str = "test", task: Optional[str] = None) -> Union[CaptionReport, VqaReport]:
    pipeline = load_pipeline(checkpoint)
    if task is not None and task != pipeline.task:
        raise TaskMismatchError(f"{checkpoint} holds a {pipeline.task} model but {task} evaluation was requested")
    train, test, vocab = load_dataset(dataset_dir)
    if vocab != pipeline.vocab:
        raise TaskMismatchError(f"dataset {dataset_dir} was built with a different vocabulary than {checkpoint}")
    samples = train if split == "train" else test
    if pipeline.task == "vqa" and not any(s.qa for s in samples):
        raise TaskMismatchError(f"dataset {dataset_dir} has no questions for a vqa checkpoint")
    return evaluate(pipeline, samples)


def token_loss(pipeline: ScenePipeline, samples: Sequence[Sample]) -> float:
    """Teacher-forced negative log-likelihood per predicted token, over every reference caption."""
    pipeline.require("caption")
    total, tokens = 0.0, 0
    with no_grad():
        for sample in samples:
            encoding = pipeline.encode(sample.scene.canvas)
            for caption in sample.captions:
                total += caption_nll(pipeline.model, encoding, caption).item()
                tokens += len(caption) - 1
    if tokens == 0:
        raise TaskMismatchError("no reference captions to score")
    return total / tokens


def attention_localization(pipeline: ScenePipeline, samples: Sequence[Sample]) -> tuple[float, int]:
    """Fraction of object-word steps whose most attended region is the object's cell.

    Only single-object scenes count. Each reference caption is fed word by word,
    and the steps whose target is the object's size, colour or shape are scored.
    """
    pipeline.require("caption")
    hits = total = 0
    for sample in samples:
        if len(sample.scene.objects) != 1:
            continue
        obj = sample.scene.objects[0]
        words = {pipeline.vocab.index[w] for w in (obj.size, obj.color, obj.shape) if w in pipeline.vocab.index}
        cell = obj.cell(sample.scene.grid_w)
        with no_grad():
            encoding = pipeline.encode(sample.scene.canvas)
            traces = [teacher_forced_trace(pipeline.model, encoding, caption) for caption in sample.captions]
        for step in (s for trace in traces for s in trace.steps):
            if step.alpha is None or step.token not in words:
                continue
            total += 1
            hits += int(np.argmax(step.alpha)) == cell
    if total == 0:
        logger.warning("no object-word steps found for the localisation check")
        return 0.0, 0
    return hits / total, total
