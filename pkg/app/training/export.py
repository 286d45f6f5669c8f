"""Attention export: per-step region maps as text matrices and graymaps."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Optional

import numpy as np

from app.models.pipeline import ScenePipeline
from app.numeric.tensor import no_grad
from app.utils.graymap import write_graymap
from app.world.dataset import Sample

logger = logging.getLogger(__name__)


def format_matrix(weights: np.ndarray) -> str:
    return "".join(" ".join(repr(float(v)) for v in row) + "\n" for row in weights)


def format_weights(labels, weights) -> str:
    return "".join(f"{label}\t{float(w)!r}\n" for label, w in zip(labels, weights))


def _write_region_map(directory: Path, stem: str, weights: np.ndarray, grid_h: int, grid_w: int) -> list[Path]:
    grid = np.asarray(weights).reshape(grid_h, grid_w)
    text = directory / f"{stem}.txt"
    text.write_text(format_matrix(grid), encoding="utf-8")
    return [text, write_graymap(grid, directory / f"{stem}.pgm")]


def export_attention(pipeline: ScenePipeline, sample: Sample, out_dir, question_index: Optional[int] = None) -> list[Path]:
    """Write region maps, concept weights and a step trace for one sample."""
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    config = pipeline.config
    canvas = sample.scene.canvas
    written: list[Path] = []

    state = pipeline.concept_state(canvas)
    written.append(directory / "concepts.txt")
    written[-1].write_text(format_weights(pipeline.vocab.concepts, state.probabilities), encoding="utf-8")

    if pipeline.task == "caption":
        words, trace, encoding = pipeline.caption(canvas)
        lines = ["step\ttoken\tgate\tlog_prob\n"]
        for t, step in enumerate(trace.steps):
            token = pipeline.vocab.tokens[step.token]
            gate = "-" if step.gate is None else repr(step.gate)
            lines.append(f"{t}\t{token}\t{gate}\t{step.log_prob!r}\n")
            if step.alpha is not None:
                written += _write_region_map(directory, f"step_{t:02d}", step.alpha, config.grid_h, config.grid_w)
        written.append(directory / "trace.txt")
        written[-1].write_text("".join(lines), encoding="utf-8")
        logger.info("exported %d decode steps for caption %r", len(trace.steps), " ".join(words))
    else:
        indices = range(len(sample.qa)) if question_index is None else [question_index]
        lines = ["question\tanswer\tpredicted\n"]
        with no_grad():
            encoding = pipeline.encode(canvas, state)
            outputs = {k: pipeline.model(encoding, sample.qa[k].question) for k in indices}
        for k, output in outputs.items():
            qa = sample.qa[k]
            question = " ".join(pipeline.vocab.decode(qa.question))
            answer = pipeline.vocab.answers[output.predicted]
            lines.append(f"{question}\t{pipeline.vocab.answers[qa.answer]}\t{answer}\n")
            if output.alpha is not None:
                written += _write_region_map(directory, f"question_{k:02d}", output.alpha.data, config.grid_h, config.grid_w)
        written.append(directory / "trace.txt")
        written[-1].write_text("".join(lines), encoding="utf-8")

    if encoding.semantic is not None:
        written += _write_region_map(directory, "semantic_regions", encoding.semantic.alpha_l.data, config.grid_h, config.grid_w)
        written.append(directory / "semantic_concepts.txt")
        written[-1].write_text(format_weights(pipeline.vocab.concepts, encoding.semantic.alpha_c.data), encoding="utf-8")
    return written
