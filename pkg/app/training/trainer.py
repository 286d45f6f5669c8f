"""Two-phase training: the concept predictor first, then the task head.

Progress is a single global step counter. The batch order of every epoch is
drawn from `default_rng([seed, phase, epoch])`, so a run resumed from a
checkpoint at step k continues exactly like the uninterrupted run.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from app.core.config import RunConfig, write_key_value_file
from app.core.errors import ConfigError, TaskMismatchError
from app.models.captioner import caption_loss
from app.models.concepts import multilabel_loss_from_logits
from app.models.pipeline import ConceptState, ScenePipeline
from app.models.vqa import vqa_loss
from app.numeric import functions as F
from app.numeric.optim import Optimizer, OptimizerState
from app.numeric.tensor import Tensor
from app.training.checkpoint import load_checkpoint, save_checkpoint
from app.world.dataset import Sample
from app.world.vocab import Vocabulary

logger = logging.getLogger(__name__)

CONCEPT_PHASE = "concepts"
TASK_PHASE = "model"
CONCEPT_LOG = "concept_loss.log"
TASK_LOG = "loss.log"
FINAL_CHECKPOINT = "model.datn"
SHARED_PREFIXES = ("concepts.", "model.regions.", "model.semantic.")


@dataclass
class TrainingResult:
    pipeline: ScenePipeline
    step: int
    concept_losses: list[float] = field(default_factory=list)
    losses: list[float] = field(default_factory=list)
    checkpoint: Optional[Path] = None


def _new_state(config: RunConfig) -> OptimizerState:
    return OptimizerState(
        kind=config.optimizer,
        learning_rate=config.learning_rate,
        beta1=config.beta1,
        beta2=config.beta2,
        rho=config.rho,
        epsilon=config.epsilon,
    )


def format_loss(step: int, loss: float) -> str:
    return f"{step}\t{loss!r}\n"


def read_losses(path: Path) -> list[float]:
    if not path.exists():
        return []
    return [float(line.split("\t")[1]) for line in path.read_text(encoding="utf-8").splitlines() if line]


def _trim_log(path: Path, keep: int) -> None:
    """Keep the first `keep` entries of a loss log (used when resuming)."""
    if not path.exists():
        path.write_text("", encoding="utf-8")
        return
    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    path.write_text("".join(lines[:keep]), encoding="utf-8")


def share_parameters(pipeline: ScenePipeline, checkpoint_path) -> list[str]:
    """Copy concept predictor, region encoder and semantic attention weights from a caption checkpoint."""
    source = load_checkpoint(checkpoint_path)
    if source.config.task != "caption":
        raise TaskMismatchError(f"shared checkpoint {checkpoint_path} is a {source.config.task} checkpoint")
    own = dict(pipeline.named_parameters())
    shared = []
    for name, value in source.parameters.items():
        if not name.startswith(SHARED_PREFIXES) or name not in own:
            continue
        if value.shape != own[name].shape:
            raise ConfigError(f"shared parameter {name}: shape {value.shape} does not match {own[name].shape}")
        own[name].data = value.copy()
        shared.append(name)
    logger.info("shared %d parameters from %s", len(shared), checkpoint_path)
    return shared


class Trainer:
    def __init__(self, config: RunConfig, train: Sequence[Sample], vocab: Vocabulary, out_dir):
        if not train:
            raise ConfigError("training set is empty")
        if config.task == "vqa" and not any(s.qa for s in train):
            raise ConfigError("vqa training needs samples with questions")
        self.config = config
        self.train = list(train)
        self.vocab = vocab
        self.out_dir = Path(out_dir)
        self.pipeline = ScenePipeline(config, vocab)
        self.steps_per_epoch = math.ceil(len(self.train) / config.batch_size)
        concept_epochs = 0 if config.shared_checkpoint else config.concept_epochs
        # upper bound; concept_target_loss may end the phase sooner
        self.concept_steps = concept_epochs * self.steps_per_epoch
        self.task_steps = config.epochs * self.steps_per_epoch
        self.states = {CONCEPT_PHASE: _new_state(config), TASK_PHASE: _new_state(config)}
        self.step = 0
        self.concept_end: Optional[int] = None if self.concept_steps else 0
        self._concept_epoch: list[float] = []
        self._concept_cache: Optional[list[ConceptState]] = None

    @property
    def total_steps(self) -> Optional[int]:
        """Known once the concept phase has ended."""
        return None if self.concept_end is None else self.concept_end + self.task_steps

    def learning_rate(self, epoch: int) -> float:
        config = self.config
        return config.learning_rate * config.learning_rate_decay ** (epoch // config.epochs_per_decay)

    def _concept_phase_done(self) -> bool:
        """Decide, at the current step, whether the concept phase is over."""
        if self.concept_end is not None:
            return True
        target = self.config.concept_target_loss
        at_boundary = self.step > 0 and self.step % self.steps_per_epoch == 0
        if self.step >= self.concept_steps:
            self.concept_end = self.step
        elif target is not None and at_boundary and len(self._concept_epoch) == self.steps_per_epoch:
            mean = sum(self._concept_epoch) / len(self._concept_epoch)
            if mean <= target:
                logger.info("concept loss %.6f reached target %g after %d steps", mean, target, self.step)
                self.concept_end = self.step
        if at_boundary:
            self._concept_epoch = []
        return self.concept_end is not None

    def restore(self, checkpoint_path) -> None:
        checkpoint = load_checkpoint(checkpoint_path)
        if checkpoint.config != self.config:
            raise ConfigError(f"checkpoint {checkpoint_path} was written with a different run config")
        if checkpoint.vocab != self.vocab:
            raise ConfigError(f"checkpoint {checkpoint_path} was written with a different vocabulary")
        self.pipeline.load_state_dict(checkpoint.parameters)
        self.states.update(checkpoint.optimizers)
        self.step = checkpoint.step
        concept_count = self.states[CONCEPT_PHASE].step_count
        if self.step > concept_count:
            self.concept_end = concept_count
        else:
            # the epoch in progress decides whether the concept phase stops early
            done = concept_count % self.steps_per_epoch or (self.steps_per_epoch if concept_count else 0)
            logged = read_losses(self.out_dir / CONCEPT_LOG)[:concept_count]
            self._concept_epoch = logged[len(logged) - done:] if done else []
        logger.info("resumed from %s at step %d", checkpoint_path, self.step)

    def _optimizer(self, phase: str) -> Optimizer:
        if phase == CONCEPT_PHASE:
            params = self.pipeline.concepts.named_parameters("concepts.")
        else:
            params = self.pipeline.model.named_parameters("model.")
        return Optimizer([(n, p) for n, p in params if p.requires_grad], self.states[phase])

    def _batch(self, phase_index: int, epoch: int, position: int) -> list[int]:
        order = np.random.default_rng([self.config.seed, phase_index, epoch]).permutation(len(self.train))
        size = self.config.batch_size
        return [int(i) for i in order[position * size:(position + 1) * size]]

    def _concept_loss(self, batch: Sequence[int]) -> Tensor:
        samples = [self.train[i] for i in batch]
        logits = F.stack([self.pipeline.concepts.logits(s.scene.canvas) for s in samples])
        labels = np.array([s.labels for s in samples], dtype=np.float64)
        return multilabel_loss_from_logits(logits, labels)

    def _concept_states(self) -> list[ConceptState]:
        # the predictor is frozen once the task phase starts
        if self._concept_cache is None:
            self._concept_cache = [self.pipeline.concept_state(s.scene.canvas) for s in self.train]
        return self._concept_cache

    def _task_loss(self, batch: Sequence[int]) -> Tensor:
        states = self._concept_states()
        encoded = [(self.train[i], self.pipeline.encode(self.train[i].scene.canvas, states[i])) for i in batch]
        if self.config.task == "caption":
            return caption_loss(self.pipeline.model, [(enc, s.captions) for s, enc in encoded])
        return vqa_loss(self.pipeline.model, [(enc, qa.question, qa.answer) for s, enc in encoded for qa in s.qa])

    def _save(self, path: Path) -> Path:
        return save_checkpoint(path, self.pipeline, self.step, self.states)

    def run(self, resume=None) -> TrainingResult:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if resume is not None:
            self.restore(resume)
        elif self.config.shared_checkpoint:
            share_parameters(self.pipeline, self.config.shared_checkpoint)
        if self.config.freeze_shared and self.config.shared_checkpoint:
            for name, p in self.pipeline.named_parameters():
                if name.startswith(SHARED_PREFIXES):
                    p.requires_grad = False
        write_key_value_file(self.config, self.out_dir / "run.env")

        concept_log, task_log = self.out_dir / CONCEPT_LOG, self.out_dir / TASK_LOG
        concept_count = self.states[CONCEPT_PHASE].step_count
        _trim_log(concept_log, concept_count)
        _trim_log(task_log, self.step - concept_count)
        result = TrainingResult(self.pipeline, self.step)

        logger.info(
            "training %s/%s: up to %d concept steps, %d task steps, %d samples",
            self.config.task, self.config.ablation, self.concept_steps, self.task_steps, len(self.train),
        )
        optimizers = {CONCEPT_PHASE: self._optimizer(CONCEPT_PHASE), TASK_PHASE: self._optimizer(TASK_PHASE)}
        while not self._concept_phase_done() or self.step < self.total_steps:
            if self.concept_end is None:
                phase, phase_index, local = CONCEPT_PHASE, 0, self.step
                log_path, losses, compute = concept_log, result.concept_losses, self._concept_loss
            else:
                phase, phase_index, local = TASK_PHASE, 1, self.step - self.concept_end
                log_path, losses, compute = task_log, result.losses, self._task_loss
            epoch, position = divmod(local, self.steps_per_epoch)

            optimizer = optimizers[phase]
            optimizer.state.learning_rate = self.learning_rate(epoch)
            optimizer.zero_grad()
            loss = compute(self._batch(phase_index, epoch, position))
            loss.backward()
            if self.config.clip_norm is not None:
                optimizer.clip_grad_norm(self.config.clip_norm)
            optimizer.step()
            value = loss.item()

            losses.append(value)
            if phase == CONCEPT_PHASE:
                self._concept_epoch.append(value)
            with log_path.open("a", encoding="utf-8") as handle:
                handle.write(format_loss(local, value))
            if local % self.config.log_every == 0:
                logger.info("%s step %d epoch %d loss %.6f", phase, local, epoch, value)
            self.step += 1
            if self.config.checkpoint_every and self.step % self.config.checkpoint_every == 0:
                self._save(self.out_dir / f"checkpoint-{self.step:06d}.datn")

        result.step = self.step
        result.checkpoint = self._save(self.out_dir / FINAL_CHECKPOINT)
        logger.info("finished at step %d, checkpoint %s", self.step, result.checkpoint)
        return result


def run_training(config: RunConfig, train: Sequence[Sample], vocab: Vocabulary, out_dir, resume=None) -> TrainingResult:
    return Trainer(config, train, vocab, out_dir).run(resume=resume)
