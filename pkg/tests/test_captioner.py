import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.errors import DomainError
from app.models.captioner import (
    END_ID,
    START_ID,
    Captioner,
    beam_search,
    caption_loss,
    caption_nll,
    greedy_decode,
    teacher_forced_trace,
)
from app.models.concepts import concept_set
from app.numeric import functions as F
from app.numeric.tensor import Tensor, no_grad
from tests.helpers import gradcheck, jitter, small_config

VOCAB = 12
CAPTIONS = [[START_ID, 4, 5, 6, END_ID], [START_ID, 7, 4, END_ID]]


def build(ablation="full", seed=0):
    rng = np.random.default_rng(seed)
    config = small_config(ablation=ablation)
    model = Captioner(config, VOCAB, rng)
    canvas = rng.uniform(size=(8, 8, 3))
    matrix = concept_set(rng.uniform(size=config.concepts), 0.5)
    return model, canvas, matrix


def test_parameter_sets_follow_the_ablation():
    names = {a: {n for n, _ in build(a)[0].named_parameters()} for a in ("none_att", "wa", "wsa", "full")}
    assert not any(n.startswith(("w_a", "semantic.")) for n in names["none_att"])
    assert "w_a" in names["wa"] and not any(n.startswith("semantic.") for n in names["wa"])
    assert names["full"] - names["wsa"] == {"w_g", "b_g"}
    assert names["wsa"] <= names["full"]


def test_step_distributions_and_gate_range():
    model, canvas, matrix = build("full")
    encoding = model.encode(canvas, matrix)
    h = model.initial_state()
    for token in CAPTIONS[0][:-1]:
        out = model.step(token, encoding, h)
        assert out.alpha.data.sum() == pytest.approx(1.0, abs=1e-9)
        assert F.softmax(out.logits).data.sum() == pytest.approx(1.0, abs=1e-9)
        assert 0.0 < out.gate < 1.0
        h = out.h


def test_gate_is_fixed_to_one_without_the_gate_network():
    model, canvas, matrix = build("wsa")
    out = model.step(START_ID, model.encode(canvas, matrix), model.initial_state())
    assert out.gate == 1.0
    model, canvas, matrix = build("wa")
    out = model.step(START_ID, model.encode(canvas, matrix), model.initial_state())
    assert out.gate is None


def test_decode_step_probabilities_match_step_logits():
    model, canvas, matrix = build("wa")
    encoding = model.encode(canvas, matrix)
    h0 = model.initial_state()
    alpha, z = model.word_attention(encoding.context.features, h0)
    h, p = model.decode_step(model.embed_word(START_ID), z, None, h0)
    out = model.step(START_ID, encoding, h0)
    assert_allclose(p.data, F.softmax(out.logits).data, rtol=1e-12)
    assert_allclose(h.data, out.h.data, rtol=1e-12)


def test_loss_is_mean_over_captions():
    model, canvas, matrix = build("full")
    encoding = model.encode(canvas, matrix)
    total = sum(caption_nll(model, encoding, c).item() for c in CAPTIONS)
    assert caption_loss(model, [(encoding, CAPTIONS)]).item() == pytest.approx(total / 2)


@pytest.mark.parametrize("caption", [[START_ID, END_ID], [4, 5, END_ID], [START_ID, 4, 5]])
def test_malformed_captions_are_rejected(caption):
    model, canvas, matrix = build("wa")
    with pytest.raises(DomainError):
        caption_nll(model, model.encode(canvas, matrix), caption)


@pytest.mark.parametrize("ablation", ["none_att", "wa", "wsa", "full"])
def test_caption_loss_gradients(ablation):
    model, canvas, matrix = build(ablation, seed=2)
    jitter(model.parameters(), seed=2)
    gradcheck(lambda: caption_loss(model, [(model.encode(canvas, matrix), CAPTIONS)]), model.parameters(), points=25)


def test_zero_gate_cuts_the_semantic_pathway():
    model, canvas, matrix = build("full")
    loss = caption_loss(model, [(model.encode(canvas, matrix), CAPTIONS)], gate_override=0.0)
    loss.backward()
    for name, p in model.semantic.named_parameters():
        assert p.grad is None or np.allclose(p.grad, 0.0), name
    assert model.w_g.grad is None or np.allclose(model.w_g.grad, 0.0)


def test_beam_of_one_reproduces_greedy():
    model, canvas, matrix = build("full", seed=5)
    encoding = model.encode(canvas, matrix)
    greedy_tokens, greedy_trace = greedy_decode(model, encoding, 10)
    beam_tokens, beam_trace = beam_search(model, encoding, 1, 10)
    assert beam_tokens == greedy_tokens
    assert [s.token for s in beam_trace.steps] == [s.token for s in greedy_trace.steps]


def test_decoded_tokens_exclude_the_end_token():
    model, canvas, matrix = build("wa", seed=6)
    encoding = model.encode(canvas, matrix)
    for tokens, trace in (greedy_decode(model, encoding, 6), beam_search(model, encoding, 3, 6)):
        assert END_ID not in tokens
        assert len(tokens) <= 6
        for step in trace.steps:
            assert step.alpha.sum() == pytest.approx(1.0)
    with pytest.raises(DomainError):
        greedy_decode(model, encoding, 0)


def test_loss_does_not_depend_on_sample_order():
    model, canvas, matrix = build("full", seed=7)
    jitter(model.parameters(), seed=7)
    other = np.random.default_rng(8).uniform(size=(8, 8, 3))
    batch = [(model.encode(canvas, matrix), CAPTIONS), (model.encode(other, matrix), CAPTIONS[::-1])]
    forward = caption_loss(model, batch).item()
    assert caption_loss(model, batch[::-1]).item() == pytest.approx(forward, rel=1e-12, abs=1e-12)


def test_uniform_word_distribution_costs_log_vocabulary_per_token():
    model, canvas, matrix = build("full", seed=3)
    model.output.weight.data = np.zeros_like(model.output.weight.data)
    model.output.bias.data = np.zeros_like(model.output.bias.data)
    encoding = model.encode(canvas, matrix)
    for caption in CAPTIONS:
        expected = (len(caption) - 1) * np.log(VOCAB)
        assert caption_nll(model, encoding, caption).item() == pytest.approx(expected, rel=1e-12)


def test_step_outputs_normalised_over_random_states():
    rng = np.random.default_rng(11)
    cases = 0
    with no_grad():
        while cases < 10_000:
            model, canvas, matrix = build("full", seed=int(rng.integers(1 << 30)))
            jitter(model.parameters(), seed=cases, scale=float(rng.uniform(0.1, 1.5)))
            encoding = model.encode(canvas, matrix)
            hidden = model.initial_state().shape
            for _ in range(500):
                h = Tensor(rng.uniform(-1.0, 1.0, size=hidden))
                out = model.step(int(rng.integers(VOCAB)), encoding, h)
                for dist in (out.alpha.data, F.softmax(out.logits).data):
                    assert abs(dist.sum() - 1.0) < 1e-9
                    assert np.all(dist > 0.0)
                assert 0.0 < out.gate < 1.0
                cases += 1


def test_teacher_forced_trace_follows_the_gold_caption():
    model, canvas, matrix = build("full", seed=9)
    encoding = model.encode(canvas, matrix)
    trace = teacher_forced_trace(model, encoding, CAPTIONS[0])
    assert [s.token for s in trace.steps] == CAPTIONS[0][1:]
    assert sum(s.log_prob for s in trace.steps) == pytest.approx(-caption_nll(model, encoding, CAPTIONS[0]).item(), rel=1e-12)
    assert all(s.alpha.sum() == pytest.approx(1.0) for s in trace.steps)
