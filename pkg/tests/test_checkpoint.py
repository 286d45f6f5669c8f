import struct

import numpy as np
import pytest

from app.core.errors import CheckpointError
from app.models.pipeline import ScenePipeline
from app.numeric.optim import OptimizerState
from app.training.checkpoint import MAGIC, decode_checkpoint, encode_checkpoint, load_checkpoint, load_pipeline, save_checkpoint


@pytest.fixture
def encoded(tiny_dataset, caption_config):
    _, _, vocab = tiny_dataset
    pipeline = ScenePipeline(caption_config, vocab)
    params = pipeline.state_dict()
    state = OptimizerState(kind="adam", learning_rate=1e-3, step_count=3)
    state.first_moment = {k: np.full_like(v, 0.5) for k, v in params.items()}
    state.second_moment = {k: np.full_like(v, 0.25) for k, v in params.items()}
    return pipeline, encode_checkpoint(caption_config, vocab, 3, params, {"model": state})


def test_decode_then_encode_is_byte_identical(encoded):
    pipeline, data = encoded
    checkpoint = decode_checkpoint(data)
    assert checkpoint.step == 3
    assert checkpoint.config == pipeline.config
    assert checkpoint.vocab == pipeline.vocab
    assert checkpoint.optimizers["model"].step_count == 3
    again = encode_checkpoint(checkpoint.config, checkpoint.vocab, checkpoint.step, checkpoint.parameters, checkpoint.optimizers)
    assert again == data


def test_loaded_pipeline_matches_the_saved_one(encoded, tmp_path):
    pipeline, _ = encoded
    path = save_checkpoint(tmp_path / "nested" / "model.datn", pipeline, 0)
    restored = load_pipeline(path)
    for (name, a), (other, b) in zip(pipeline.named_parameters(), restored.named_parameters()):
        assert name == other
        np.testing.assert_array_equal(a.data, b.data)


def test_header_layout(encoded):
    _, data = encoded
    assert data[:4] == MAGIC
    assert struct.unpack("<I", data[4:8])[0] == 1


@pytest.mark.parametrize(
    "mangle, message",
    [
        (lambda d: b"NOPE" + d[4:], "magic"),
        (lambda d: d[:4] + struct.pack("<I", 2) + d[8:], "version"),
        (lambda d: d[:-3], "truncated"),
        (lambda d: d[:40], "truncated"),
        (lambda d: d + b"\x00", "trailing"),
    ],
)
def test_corrupt_checkpoints_are_rejected(encoded, mangle, message):
    _, data = encoded
    with pytest.raises(CheckpointError, match=message):
        decode_checkpoint(mangle(data))


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "absent.datn")
