import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.errors import ShapeError
from app.models.concepts import concept_set
from app.models.semantic import SemanticAttention, attention_weights, similarity_matrices
from app.numeric import functions as F
from app.numeric.tensor import Tensor, no_grad
from tests.helpers import gradcheck, jitter


def make(regions=4, D=5, c=6, d=3, seed=0, variant="softmax"):
    rng = np.random.default_rng(seed)
    attn = SemanticAttention(D, c, d, rng, variant)
    context = rng.normal(size=(regions, D))
    matrix = concept_set(rng.uniform(size=c), 0.5)
    return attn, context, matrix


def test_similarity_matrix_shapes_and_values():
    attn, context, matrix = make()
    P, P_prime = similarity_matrices(context, matrix, attn)
    assert P.shape == (4, 6)
    assert P_prime.shape == (6, 4)
    left = attn.W_l.data @ context.T + attn.b_l.data[:, None]
    right = attn.W_c.data @ matrix + attn.b_c.data[:, None]
    assert_allclose(P.data, left.T @ right, rtol=1e-12)


def test_attention_weights_are_softmax_of_row_maxima():
    scores = np.array([[1.0, 3.0], [2.0, 0.0], [-1.0, -2.0]])
    expected = np.exp([3.0, 2.0, -1.0]) / np.exp([3.0, 2.0, -1.0]).sum()
    assert_allclose(attention_weights(scores).data, expected, rtol=1e-12)
    as_printed = np.exp(scores.max(axis=1) - scores.sum(axis=1))
    assert_allclose(attention_weights(scores, "as_printed").data, as_printed, rtol=1e-12)


def test_weights_normalised_over_randomised_inputs():
    rng = np.random.default_rng(1)
    for _ in range(2000):
        n, m = rng.integers(1, 8, size=2)
        alpha = attention_weights(rng.normal(scale=10.0, size=(n, m))).data
        assert abs(alpha.sum() - 1.0) < 1e-9
        assert np.all(alpha > 0.0)


def test_output_weights_sum_to_one_and_fuse_dimensions():
    attn, context, matrix = make()
    out = attn(context, matrix)
    assert out.alpha_l.shape == (4,)
    assert out.alpha_c.shape == (6,)
    assert out.alpha_l.data.sum() == pytest.approx(1.0, abs=1e-9)
    assert out.alpha_c.data.sum() == pytest.approx(1.0, abs=1e-9)
    assert out.fused.shape == (5 + 6,)
    assert_allclose(out.v_hat_c.data, matrix @ out.alpha_c.data)


def test_empty_concept_set_still_yields_weights():
    attn, context, _ = make()
    out = attn(context, np.zeros((6, 6)))
    assert out.alpha_c.data.sum() == pytest.approx(1.0)
    assert_allclose(out.v_hat_c.data, np.zeros(6))


def test_shape_mismatches():
    attn, context, matrix = make()
    with pytest.raises(ShapeError):
        attn(context[:, :3], matrix)
    with pytest.raises(ShapeError):
        attn(context, matrix[:4, :4])
    with pytest.raises(ShapeError):
        attention_weights(np.ones((0, 3)))


@pytest.mark.parametrize("variant", ["softmax", "as_printed"])
def test_semantic_attention_gradients(variant):
    attn, context, matrix = make(seed=4, variant=variant)
    jitter(attn.parameters(), seed=4)
    mix = np.random.default_rng(9).normal(size=11)
    regions = Tensor(context, requires_grad=True)
    gradcheck(lambda: F.sum(attn(regions, matrix).fused * mix), attn.parameters() + [regions], points=25)


def test_permuting_regions_permutes_region_weights_only():
    attn, context, matrix = make(regions=6, seed=5)
    jitter(attn.parameters(), seed=5)
    perm = np.random.default_rng(5).permutation(6)
    out = attn(context, matrix)
    shuffled = attn(context[perm], matrix)
    assert_allclose(shuffled.alpha_l.data, out.alpha_l.data[perm], rtol=1e-12)
    assert_allclose(shuffled.alpha_c.data, out.alpha_c.data, rtol=1e-12)
    assert_allclose(shuffled.v_hat_l.data, out.v_hat_l.data, rtol=1e-12, atol=1e-15)


def test_permuting_concept_columns_permutes_concept_weights_only():
    attn, context, _ = make(seed=6)
    jitter(attn.parameters(), seed=6)
    matrix = concept_set(np.linspace(0.1, 0.9, 6), 0.4)
    perm = np.random.default_rng(6).permutation(6)
    out = attn(context, matrix)
    shuffled = attn(context, matrix[:, perm])
    assert_allclose(shuffled.alpha_c.data, out.alpha_c.data[perm], rtol=1e-12)
    assert_allclose(shuffled.alpha_l.data, out.alpha_l.data, rtol=1e-12)
    assert_allclose(shuffled.v_hat_c.data, out.v_hat_c.data, rtol=1e-12, atol=1e-15)


def test_region_and_concept_weights_normalised_over_random_modules():
    rng = np.random.default_rng(2)
    cases = 0
    with no_grad():
        while cases < 10_000:
            regions, D, c, d = (int(k) for k in rng.integers(1, 9, size=4))
            attn = SemanticAttention(D, c, d, rng)
            jitter(attn.parameters(), seed=cases, scale=float(rng.uniform(0.1, 2.0)))
            for _ in range(100):
                context = rng.normal(scale=float(rng.uniform(0.1, 5.0)), size=(regions, D))
                out = attn(context, concept_set(rng.uniform(size=c), 0.5))
                for alpha in (out.alpha_l.data, out.alpha_c.data):
                    assert abs(alpha.sum() - 1.0) < 1e-9
                    assert np.all(alpha >= 0.0)
                cases += 1
