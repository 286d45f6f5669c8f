import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.core.errors import GradientError, ShapeError
from app.numeric.optim import Optimizer, OptimizerState, optimizer_step
from app.numeric.tensor import Tensor


def test_sgd_moves_against_the_gradient():
    params = {"w": np.array([1.0, -2.0])}
    state = OptimizerState(kind="sgd", learning_rate=0.1)
    optimizer_step(state, params, {"w": np.array([0.5, -1.0])})
    assert_allclose(params["w"], [0.95, -1.9])
    assert state.step_count == 1


def test_adam_first_step_has_learning_rate_magnitude():
    params = {"w": np.array([0.0, 0.0])}
    state = OptimizerState(kind="adam", learning_rate=1e-3)
    optimizer_step(state, params, {"w": np.array([3.0, -0.2])})
    assert_allclose(params["w"], [-1e-3, 1e-3], rtol=1e-6)
    assert set(state.accumulators()) == {"m.w", "v.w"}


def test_rmsprop_keeps_a_running_square_average():
    params = {"w": np.array([1.0])}
    state = OptimizerState(kind="rmsprop", learning_rate=0.01, rho=0.9)
    optimizer_step(state, params, {"w": np.array([2.0])})
    assert_allclose(state.second_moment["w"], [0.4])
    assert_allclose(params["w"], [1.0 - 0.01 * 2.0 / (np.sqrt(0.4) + 1e-8)])
    assert "m.w" not in state.accumulators()


def test_missing_or_misshaped_gradients_are_rejected():
    state = OptimizerState(kind="sgd", learning_rate=0.1)
    with pytest.raises(GradientError):
        optimizer_step(state, {"w": np.zeros(2)}, {"w": None})
    with pytest.raises(ShapeError):
        optimizer_step(state, {"w": np.zeros(2)}, {"w": np.zeros(3)})
    assert state.step_count == 0


def test_optimizer_updates_bound_parameters_in_place():
    w = Tensor(np.array([1.0, 1.0]), requires_grad=True)
    optimizer = Optimizer([("w", w)], OptimizerState(kind="sgd", learning_rate=0.5))
    (w * w).sum().backward()
    optimizer.step()
    assert_allclose(w.data, [0.0, 0.0])
    optimizer.zero_grad()
    assert w.grad is None


def test_adam_minimises_a_quadratic():
    w = Tensor(np.array([3.0, -4.0]), requires_grad=True)
    optimizer = Optimizer([("w", w)], OptimizerState(kind="adam", learning_rate=0.1))
    for _ in range(500):
        optimizer.zero_grad()
        (w * w).sum().backward()
        optimizer.step()
    assert np.abs(w.data).max() < 0.05


@pytest.mark.parametrize("kind", ["sgd", "rmsprop", "adam"])
def test_zero_learning_rate_leaves_parameters_unchanged(kind):
    params = {"w": np.array([0.3, -1.7, 2.0])}
    before = params["w"].copy()
    state = OptimizerState(kind=kind, learning_rate=0.0)
    optimizer_step(state, params, {"w": np.array([1.0, -0.5, 4.0])})
    np.testing.assert_array_equal(params["w"], before)
    assert state.step_count == 1


def test_adam_with_zero_gradients_leaves_parameters_unchanged():
    params = {"w": np.array([0.3, -1.7]), "b": np.array([[5.0]])}
    before = {k: v.copy() for k, v in params.items()}
    state = OptimizerState(kind="adam", learning_rate=0.1)
    for _ in range(3):
        optimizer_step(state, params, {k: np.zeros_like(v) for k, v in params.items()})
    for name in params:
        np.testing.assert_array_equal(params[name], before[name])
        np.testing.assert_array_equal(state.first_moment[name], 0.0)
        np.testing.assert_array_equal(state.second_moment[name], 0.0)


def test_single_adam_step_matches_the_closed_form():
    params = {"w": np.array([1.0])}
    state = OptimizerState(kind="adam", learning_rate=0.1)
    optimizer_step(state, params, {"w": np.array([0.5])})
    assert params["w"][0] == pytest.approx(1.0 - 0.1 * 0.5 / (0.5 + 1e-8), abs=1e-12)


def test_gradients_are_clipped_to_the_global_norm():
    a = Tensor(np.zeros(2), requires_grad=True)
    b = Tensor(np.zeros(1), requires_grad=True)
    optimizer = Optimizer([("a", a), ("b", b)], OptimizerState(kind="sgd", learning_rate=1.0))
    a.grad, b.grad = np.array([3.0, 0.0]), np.array([4.0])
    assert optimizer.clip_grad_norm(10.0) == pytest.approx(5.0)
    assert_allclose(a.grad, [3.0, 0.0])
    assert optimizer.clip_grad_norm(1.0) == pytest.approx(5.0)
    assert_allclose(a.grad, [0.6, 0.0])
    assert_allclose(b.grad, [0.8])
    optimizer.step()
    assert_allclose(a.data, [-0.6, 0.0])
