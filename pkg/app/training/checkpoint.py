"""Versioned binary checkpoints.

    "DATN" | u32 version | u32 header length | header JSON (UTF-8, sorted keys)
    u32 record count | records

Each record is u32 name length, name (UTF-8), u32 rank, rank × u32 dims and
the values as little-endian float64 in row-major order. All integers are
little-endian.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

from app.core.config import RunConfig, parse_config
from app.core.errors import CheckpointError, DualAttentionError
from app.models.pipeline import ScenePipeline
from app.numeric.optim import OptimizerState
from app.world.vocab import Vocabulary

MAGIC = b"DATN"
FORMAT_VERSION = 1
_U32 = struct.Struct("<I")


@dataclass
class Checkpoint:
    config: RunConfig
    vocab: Vocabulary
    step: int
    parameters: dict[str, np.ndarray]
    optimizers: dict[str, OptimizerState] = field(default_factory=dict)

    def pipeline(self) -> ScenePipeline:
        pipeline = ScenePipeline(self.config, self.vocab)
        pipeline.load_state_dict(self.parameters)
        return pipeline


def _optimizer_header(state: OptimizerState) -> dict:
    return {
        "kind": state.kind,
        "learning_rate": state.learning_rate,
        "beta1": state.beta1,
        "beta2": state.beta2,
        "rho": state.rho,
        "epsilon": state.epsilon,
        "step_count": state.step_count,
    }


def encode_checkpoint(
    config: RunConfig,
    vocab: Vocabulary,
    step: int,
    parameters: Mapping[str, np.ndarray],
    optimizers: Optional[Mapping[str, OptimizerState]] = None,
) -> bytes:
    optimizers = optimizers or {}
    header = {
        "format_version": FORMAT_VERSION,
        "config": config.model_dump(mode="json"),
        "step": step,
        "optimizers": {phase: _optimizer_header(state) for phase, state in optimizers.items()},
        "vocab": {"tokens": vocab.tokens, "concepts": vocab.concepts, "answers": vocab.answers},
    }
    records: list[tuple[str, np.ndarray]] = list(parameters.items())
    for phase in sorted(optimizers):
        for name, value in sorted(optimizers[phase].accumulators().items()):
            records.append((f"optim.{phase}.{name}", value))

    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks = [MAGIC, _U32.pack(FORMAT_VERSION), _U32.pack(len(header_bytes)), header_bytes, _U32.pack(len(records))]
    for name, value in records:
        value = np.ascontiguousarray(value, dtype="<f8")
        encoded = name.encode("utf-8")
        chunks.append(_U32.pack(len(encoded)))
        chunks.append(encoded)
        chunks.append(_U32.pack(value.ndim))
        chunks.extend(_U32.pack(dim) for dim in value.shape)
        chunks.append(value.tobytes())
    return b"".join(chunks)


def save_checkpoint(path, pipeline: ScenePipeline, step: int, optimizers: Optional[Mapping[str, OptimizerState]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_checkpoint(pipeline.config, pipeline.vocab, step, pipeline.state_dict(), optimizers))
    return path


class _Reader:
    def __init__(self, data: bytes, source):
        self.data = data
        self.offset = 0
        self.source = source

    def take(self, count: int) -> bytes:
        if self.offset + count > len(self.data):
            raise CheckpointError(f"{self.source}: truncated checkpoint at byte {self.offset}")
        chunk = self.data[self.offset:self.offset + count]
        self.offset += count
        return chunk

    def u32(self) -> int:
        return _U32.unpack(self.take(4))[0]


def decode_checkpoint(data: bytes, source="<checkpoint>") -> Checkpoint:
    reader = _Reader(data, source)
    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint (bad magic)")
    version = reader.u32()
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{source}: unsupported format version {version}")
    try:
        header = json.loads(reader.take(reader.u32()).decode("utf-8"))
        config = parse_config(RunConfig, header["config"])
        vocab_fields = header["vocab"]
        vocab = Vocabulary(vocab_fields["tokens"], vocab_fields["concepts"], vocab_fields["answers"])
        step = int(header["step"])
        optimizer_headers = header.get("optimizers", {})
    except (ValueError, KeyError, TypeError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{source}: malformed header: {exc}") from None

    tensors: dict[str, np.ndarray] = {}
    for _ in range(reader.u32()):
        name = reader.take(reader.u32()).decode("utf-8")
        shape = tuple(reader.u32() for _ in range(reader.u32()))
        count = int(np.prod(shape, dtype=np.int64))
        tensors[name] = np.frombuffer(reader.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    if reader.offset != len(data):
        raise CheckpointError(f"{source}: {len(data) - reader.offset} trailing bytes")

    parameters = {k: v for k, v in tensors.items() if not k.startswith("optim.")}
    optimizers = {}
    for phase, fields in optimizer_headers.items():
        state = OptimizerState(**fields)
        prefix = f"optim.{phase}."
        for key, value in tensors.items():
            if not key.startswith(prefix):
                continue
            slot, _, name = key[len(prefix):].partition(".")
            (state.first_moment if slot == "m" else state.second_moment)[name] = value.copy()
        optimizers[phase] = state
    return Checkpoint(config, vocab, step, parameters, optimizers)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint not found: {path}")
    return decode_checkpoint(path.read_bytes(), source=path)


def load_pipeline(path) -> ScenePipeline:
    checkpoint = load_checkpoint(path)
    try:
        return checkpoint.pipeline()
    except DualAttentionError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
