import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from app.core.errors import ShapeError
from app.numeric import functions as F
from app.numeric import init
from app.numeric.tensor import Tensor, is_grad_enabled, no_grad
from tests.helpers import gradcheck


def param(*shape, seed=0, low=-1.0, high=1.0):
    return Tensor(np.random.default_rng(seed).uniform(low, high, size=shape), requires_grad=True)


def weighted(out: Tensor, seed=99) -> Tensor:
    """Scalar reduction sum(out * r) so every output entry reaches the gradient."""
    r = np.random.default_rng(seed).normal(size=out.shape)
    return F.sum(out * r)


@pytest.mark.parametrize(
    "build",
    [
        lambda a, b: F.add(a, b),
        lambda a, b: F.mul(a, b),
        lambda a, b: F.sub(a, b),
        lambda a, b: F.tanh(a) * F.sigmoid(b),
        lambda a, b: F.exp(a) + F.softplus(b * 3.0),
        lambda a, b: F.log(F.sigmoid(a)) - F.neg(b),
        lambda a, b: F.softmax(a, axis=1) * b,
        lambda a, b: F.log_softmax(a, axis=0) + b,
        lambda a, b: F.max(a + b, axis=1),
        lambda a, b: F.mean(a * b, axis=0),
        lambda a, b: F.concat([a, b], axis=1),
        lambda a, b: F.stack([a, b], axis=0),
        lambda a, b: F.reshape(a, (9,)) * F.reshape(b, (9,)),
        lambda a, b: F.transpose(a) + b,
        lambda a, b: a[1] * b[2],
    ],
)
def test_elementwise_and_structural_ops_match_finite_differences(build):
    a, b = param(3, 3, seed=1), param(3, 3, seed=2)
    gradcheck(lambda: weighted(build(a, b)), [a, b], points=20)


def test_matmul_and_column_add_gradients():
    w, x, v, b = param(4, 3, seed=1), param(3, 5, seed=2), param(3, seed=3), param(4, seed=4)
    gradcheck(lambda: weighted(F.column_add(F.matmul(w, x), b)), [w, x, b], points=20)
    gradcheck(lambda: weighted(F.matmul(w, v)), [w, v], points=20)
    gradcheck(lambda: F.matmul(v, v), [v], points=10)


def test_conv2d_and_pool_gradients():
    x, w, b = param(4, 4, 2, seed=1), param(3, 3, 2, 3, seed=2), param(3, seed=3)
    gradcheck(lambda: weighted(F.avg_pool2d(F.tanh(F.conv2d(x, w, b)), 2)), [x, w, b], points=30)


def test_conv2d_matches_naive_loop():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(5, 4, 2))
    w = rng.normal(size=(3, 3, 2, 3))
    b = rng.normal(size=3)
    padded = np.pad(x, ((1, 1), (1, 1), (0, 0)))
    expected = np.zeros((5, 4, 3))
    for i in range(5):
        for j in range(4):
            for o in range(3):
                expected[i, j, o] = np.sum(padded[i:i + 3, j:j + 3, :] * w[:, :, :, o]) + b[o]
    assert_allclose(F.conv2d(x, w, b).data, expected, atol=1e-12)


def test_avg_pool_averages_blocks():
    x = np.arange(16.0).reshape(4, 4, 1)
    assert_array_equal(F.avg_pool2d(x, 2).data[:, :, 0], [[2.5, 4.5], [10.5, 12.5]])


def test_space_to_depth_matches_block_loop():
    x = np.random.default_rng(6).normal(size=(6, 4, 3))
    out = F.space_to_depth(x, 2).data
    assert out.shape == (3, 2, 12)
    for i in range(3):
        for j in range(2):
            assert_array_equal(out[i, j], x[2 * i:2 * i + 2, 2 * j:2 * j + 2, :].reshape(-1))
    assert_array_equal(F.tensor_algebra("space_to_depth", x, size=2).data, out)


def test_space_to_depth_gradients():
    x = param(4, 6, 2, seed=7)
    gradcheck(lambda: weighted(F.tanh(F.space_to_depth(x, 2))), [x], points=20)


def test_shared_subexpression_accumulates_gradient():
    x = Tensor(np.array([2.0]), requires_grad=True)
    y = x * x
    F.sum(y + y * x).backward()
    # d/dx (x^2 + x^3) = 2x + 3x^2
    assert_allclose(x.grad, [16.0])


def test_sigmoid_is_stable_at_extremes():
    out = F.sigmoid(np.array([-800.0, 0.0, 800.0])).data
    assert np.all(np.isfinite(out))
    assert out[0] >= 0.0
    assert out[1] == 0.5
    assert out[2] == 1.0
    assert np.isfinite(F.softplus(np.array([800.0, -800.0])).data).all()


def test_softmax_sums_to_one_for_large_scores():
    rng = np.random.default_rng(0)
    for _ in range(200):
        s = F.softmax(rng.normal(scale=50.0, size=rng.integers(1, 20))).data
        assert abs(s.sum() - 1.0) < 1e-9
        assert np.all(s >= 0.0)


def test_no_grad_records_nothing_and_restores():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        assert not is_grad_enabled()
        y = F.tanh(x)
    assert is_grad_enabled()
    assert not y.requires_grad
    assert y._ctx is None


def test_backward_needs_scalar_root():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        F.tanh(x).backward()


@pytest.mark.parametrize(
    "call",
    [
        lambda: F.matmul(np.ones((2, 3)), np.ones((2, 3))),
        lambda: F.column_add(np.ones((2, 3)), np.ones(3)),
        lambda: F.add(np.ones(3), np.ones(4)),
        lambda: F.concat([np.ones((2, 2)), np.ones((3, 3))], axis=1),
        lambda: F.reshape(np.ones(6), (4,)),
        lambda: F.softmax(np.ones(0)),
        lambda: F.avg_pool2d(np.ones((3, 3, 1)), 2),
        lambda: F.conv2d(np.ones((4, 4, 2)), np.ones((2, 2, 2, 1)), np.ones(1)),
        lambda: F.space_to_depth(np.ones((6, 4, 1)), 4),
    ],
)
def test_shape_mismatches_are_rejected(call):
    with pytest.raises(ShapeError):
        call()


def test_tensor_algebra_dispatches_by_op_code():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert_array_equal(F.tensor_algebra("matmul", a, np.eye(2)).data, a)
    assert_array_equal(F.tensor_algebra("column_add", a, np.array([1.0, -1.0])).data, [[2.0, 3.0], [2.0, 3.0]])
    with pytest.raises(ValueError):
        F.tensor_algebra("nope", a)


def test_glorot_bounds_and_seed_control():
    rng = np.random.default_rng(3)
    w = init.matrix(20, 30, rng)
    assert np.abs(w).max() <= np.sqrt(6.0 / 50.0)
    assert_array_equal(init.matrix(20, 30, np.random.default_rng(3)), w)
    assert_array_equal(init.zeros(4), np.zeros(4))
