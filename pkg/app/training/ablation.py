"""Train every ablation variant for each seed and average the held-out metrics."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from app.core.config import CAPTION_ABLATIONS, VQA_ABLATIONS, RunConfig
from app.core.errors import ConfigError
from app.schemas.reports import AblationReport, AblationRow, CaptionReport
from app.training.evaluation import evaluate
from app.training.trainer import run_training
from app.world.dataset import Sample
from app.world.vocab import Vocabulary

logger = logging.getLogger(__name__)


def variants_for(task: str) -> tuple[str, ...]:
    return CAPTION_ABLATIONS if task == "caption" else VQA_ABLATIONS


def report_metrics(report) -> dict[str, float]:
    if isinstance(report, CaptionReport):
        names = ("bleu_1", "bleu_2", "bleu_3", "bleu_4", "cider", "exact_match")
    else:
        names = ("accuracy", "wups_0_9", "wups_0_0")
    return {name: float(getattr(report, name)) for name in names}


def run_ablation_suite(
    base: RunConfig,
    train: Sequence[Sample],
    test: Sequence[Sample],
    vocab: Vocabulary,
    seeds: Sequence[int],
    out_dir,
) -> AblationReport:
    if not seeds:
        raise ConfigError("an ablation suite needs at least one seed")
    out_dir = Path(out_dir)
    rows = []
    for variant in variants_for(base.task):
        runs = []
        for seed in seeds:
            config = base.model_copy(update={"ablation": variant, "seed": seed})
            result = run_training(config, train, vocab, out_dir / variant / f"seed-{seed}")
            metrics = report_metrics(evaluate(result.pipeline, test))
            logger.info("ablation %s seed %d: %s", variant, seed, metrics)
            runs.append(metrics)
        means = {name: float(np.mean([m[name] for m in runs])) for name in runs[0]}
        rows.append(AblationRow(variant=variant, seeds=list(seeds), metrics=means))
    report = AblationReport(task=base.task, rows=rows)
    (out_dir / "ablation.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return report
