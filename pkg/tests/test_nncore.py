import numpy as np
import pytest

from src.errors import NonDeterministicClosureError, NumericError, OptimizerStateError, ShapeError
from src.nncore import (
    AdamState,
    ParamSet,
    adam_step,
    cosine_schedule,
    add_linear,
    as_tensor,
    finite_difference_check,
    hadamard,
    linear_backward,
    linear_forward,
    matmul,
    mse_loss,
    sigmoid,
    tanh_act,
)


# -------------------------------------------------------------------- tensors

def test_matmul_examples():
    np.testing.assert_array_equal(matmul(np.eye(3), np.arange(9.0).reshape(3, 3)), np.arange(9.0).reshape(3, 3))
    np.testing.assert_array_equal(matmul(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([[5.0], [6.0]])),
                                  [[17.0], [39.0]])


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError) as info:
        matmul(np.ones((2, 3)), np.ones((2, 3)))
    assert "(2, 3)" in str(info.value)


def test_matmul_is_associative(rng):
    a, b, c = rng.normal(size=(3, 4)), rng.normal(size=(4, 5)), rng.normal(size=(5, 2))
    np.testing.assert_allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), rtol=1e-12, atol=1e-12)


def test_hadamard():
    np.testing.assert_array_equal(hadamard(np.ones((2, 2)), np.zeros((2, 2))), np.zeros((2, 2)))
    with pytest.raises(ShapeError):
        hadamard(np.ones((2, 2)), np.ones((2, 3)))


def test_activations():
    assert sigmoid(0.0) == 0.5
    assert tanh_act(0.0) == 0.0
    assert sigmoid(1.0) == pytest.approx(0.73105858, abs=1e-8)
    saturated = sigmoid(np.array([-700.0, 700.0]))
    assert np.all(np.isfinite(saturated))
    assert np.all((saturated >= 0.0) & (saturated <= 1.0))


def test_as_tensor_rejects_nan():
    with pytest.raises(NumericError):
        as_tensor([1.0, np.nan])


# --------------------------------------------------------------------- linear

def _scalar_linear():
    params = ParamSet()
    params.add("lin.W", [[2.0]])
    params.add("lin.b", [1.0])
    return params


def test_linear_forward_and_backward():
    params = _scalar_linear()
    y, cache = linear_forward(params, "lin", np.array([[3.0]]))
    assert y[0, 0] == 7.0
    dx = linear_backward(params, cache, np.array([[1.0]]))
    assert dx[0, 0] == 2.0
    assert params["lin.W"].grad[0, 0] == 3.0
    assert params["lin.b"].grad[0] == 1.0


def test_linear_identity(rng):
    params = ParamSet()
    params.add("id.W", np.eye(4))
    params.add("id.b", np.zeros(4))
    x = rng.normal(size=(3, 4))
    y, _ = linear_forward(params, "id", x)
    np.testing.assert_array_equal(y, x)


def test_param_names_are_unique():
    params = _scalar_linear()
    with pytest.raises(ValueError):
        params.add("lin.W", [[1.0]])


# ----------------------------------------------------------------------- loss

def test_mse_examples():
    loss, grad = mse_loss(np.array([1.0, 2.0]), np.array([1.0, 2.0]))
    assert loss == 0.0
    np.testing.assert_array_equal(grad, [0.0, 0.0])
    loss, grad = mse_loss(np.array([2.0, 2.0]), np.array([0.0, 2.0]))
    assert loss == 2.0
    np.testing.assert_array_equal(grad, [2.0, 0.0])


def test_mse_is_symmetric(rng):
    a, b = rng.normal(size=10), rng.normal(size=10)
    assert mse_loss(a, b)[0] == mse_loss(b, a)[0]


# ---------------------------------------------------------------------- adam

def test_adam_zero_gradient_leaves_parameters():
    params = _scalar_linear()
    before = params.snapshot()
    adam_step(params, AdamState.for_params(params))
    for name, value in before.items():
        np.testing.assert_array_equal(params.value(name), value)


def test_adam_first_step_moves_by_learning_rate():
    params = ParamSet()
    params.add("p", [0.0])
    params["p"].grad[:] = 3.0
    adam_step(params, AdamState.for_params(params, learning_rate=1e-3))
    assert params.value("p")[0] == pytest.approx(-1e-3, rel=1e-6)
    assert params["p"].grad[0] == 0.0


def test_adam_skips_frozen_parameters():
    params = _scalar_linear()
    params.freeze("lin.W")
    params["lin.W"].grad[:] = 5.0
    params["lin.b"].grad[:] = 5.0
    before = params.value("lin.W").copy()
    adam_step(params, AdamState.for_params(params))
    np.testing.assert_array_equal(params.value("lin.W"), before)
    assert params.value("lin.b")[0] != 1.0
    assert params["lin.W"].grad[0, 0] == 0.0


def test_adam_detects_moment_shape_drift():
    params = _scalar_linear()
    state = AdamState.for_params(params)
    state.m["lin.W"] = np.zeros((2, 2))
    with pytest.raises(OptimizerStateError):
        adam_step(params, state)


def test_clip_grad_norm():
    params = ParamSet()
    params.add("p", [0.0, 0.0])
    params["p"].grad[:] = [30.0, 40.0]
    assert params.clip_grad_norm(5.0) == pytest.approx(50.0)
    assert params.grad_norm() == pytest.approx(5.0)


def test_cosine_schedule_endpoints():
    rate = cosine_schedule(1e-2, 1e-5, 500)
    assert rate(0) == pytest.approx(1e-2, rel=1e-12)
    assert rate(499) == pytest.approx(1e-5, rel=1e-9)
    rates = np.array([rate(epoch) for epoch in range(500)])
    assert np.all(np.diff(rates) <= 0.0)
    assert rate(249.5) == pytest.approx(0.5 * (1e-2 + 1e-5), rel=1e-12)


@pytest.mark.parametrize("base,floor,epochs", [(0.0, 0.0, 10), (1e-3, 1e-2, 10), (1e-3, 0.0, 0)])
def test_cosine_schedule_rejects_bad_arguments(base, floor, epochs):
    with pytest.raises(ValueError):
        cosine_schedule(base, floor, epochs)


# ---------------------------------------------------------- gradient checking

def test_fd_check_quadratic():
    params = ParamSet()
    params.add("p", [3.0])

    def closure():
        p = params["p"]
        p.grad += 2.0 * p.value
        return float(p.value[0] ** 2)

    assert finite_difference_check(closure, params) < 1e-8


@pytest.mark.parametrize("seed", range(10))
def test_fd_check_linear_mse(seed):
    rng = np.random.default_rng(seed)
    n_in, n_out, batch = rng.integers(1, 9), rng.integers(1, 9), rng.integers(1, 6)
    params = ParamSet()
    add_linear(params, "lin", int(n_in), int(n_out), rng)
    x = rng.normal(size=(batch, n_in))
    target = rng.normal(size=(batch, n_out))

    def closure():
        y, cache = linear_forward(params, "lin", x)
        loss, grad = mse_loss(y, target)
        linear_backward(params, cache, grad)
        return loss

    assert finite_difference_check(closure, params) < 1e-6


def test_fd_check_all_frozen_is_zero():
    params = _scalar_linear()
    params.freeze()
    assert finite_difference_check(lambda: 1.0, params) == 0.0


def test_fd_check_rejects_nondeterministic_closure():
    params = _scalar_linear()
    calls = iter(range(100))
    with pytest.raises(NonDeterministicClosureError):
        finite_difference_check(lambda: float(next(calls)), params)
