"""Backpropagation against the central-difference oracle."""

import numpy as np
import pytest

from surgebias.nn import (
    Conv1DLayer,
    DenseLayer,
    FlattenLayer,
    LstmLayer,
    Network,
    finite_difference_gradient,
    max_relative_error,
)
from surgebias.model import NetworkConfig, build_network


class QuadraticLoss:
    """Minimal stand-in exposing the network parameter/loss protocol."""

    def __init__(self, theta):
        self.theta = np.asarray(theta, dtype=np.float64)

    def get_params(self):
        return self.theta.copy()

    def set_params(self, vec):
        self.theta = np.asarray(vec, dtype=np.float64).copy()

    def loss(self, x, y):
        return float(np.sum(self.theta**2))


def test_fd_oracle_on_quadratic():
    toy = QuadraticLoss([3.0])
    grad = finite_difference_gradient(toy, None, None, h=1e-5)
    assert grad[0] == pytest.approx(6.0, abs=1e-8)


def test_fd_rejects_zero_step():
    with pytest.raises(ValueError, match="positive"):
        finite_difference_gradient(QuadraticLoss([1.0]), None, None, h=0.0)


def test_zero_loss_batch_has_zero_gradient():
    net = build_network(
        NetworkConfig(w_in=6, w_out=2, conv_filters=2, conv_kernel=3,
                      lstm1_units=3, lstm2_units=4, dense_units=3),
        seed=5,
    )
    x = np.random.default_rng(1).uniform(0, 1, (3, 6, 1))
    y = net.forward(x)  # targets equal to predictions: loss minimum
    loss, grad = net.loss_and_grad(x, y)
    assert loss == 0.0
    np.testing.assert_array_equal(grad, np.zeros_like(grad))


def test_single_dense_layer_closed_form():
    # scalar in/out, linear: dL/dW = 2*x*(Wx+b-y)/n, dL/db = 2*(Wx+b-y)/n
    net = Network([DenseLayer(1, 1, act="linear")])
    net.set_params(np.array([1.5, 0.25]))  # W=1.5, b=0.25
    x = np.array([[2.0]])
    y = np.array([[1.0]])
    _, grad = net.loss_and_grad(x, y)
    resid = 1.5 * 2.0 + 0.25 - 1.0
    np.testing.assert_allclose(grad, [2 * 2.0 * resid, 2 * resid], atol=1e-14)


def test_backward_requires_forward():
    layer = DenseLayer(2, 2)
    with pytest.raises(RuntimeError, match="before forward"):
        layer.backward(np.zeros((1, 2)))


def _check_network(net, x, y, tol=1e-4):
    _, analytic = net.loss_and_grad(x, y)
    fd = finite_difference_gradient(net, x, y, h=1e-5)
    err = max_relative_error(analytic, fd)
    assert err < tol, f"gradient mismatch: max relative error {err:.3e}"


def test_gradients_dense_stack():
    net = Network([DenseLayer(4, 5, act="tanh"), DenseLayer(5, 2, act="linear")])
    rng = np.random.default_rng(11)
    for layer in net.layers:
        layer.init_params(rng)
    _check_network(net, rng.standard_normal((6, 4)), rng.standard_normal((6, 2)))


def test_gradients_conv_only():
    net = Network([Conv1DLayer(1, 3, 3), FlattenLayer(), DenseLayer(18, 2)])
    rng = np.random.default_rng(12)
    for layer in net.layers:
        if hasattr(layer, "init_params"):
            layer.init_params(rng)
    _check_network(net, rng.standard_normal((4, 8, 1)), rng.standard_normal((4, 2)))


def test_gradients_lstm_only():
    net = Network([LstmLayer(2, 4), FlattenLayer(), DenseLayer(5 * 4, 3)])
    rng = np.random.default_rng(13)
    for layer in net.layers:
        if hasattr(layer, "init_params"):
            layer.init_params(rng)
    _check_network(net, rng.standard_normal((4, 5, 2)), rng.standard_normal((4, 3)))


def test_gradients_full_stack_small():
    cfg = NetworkConfig(w_in=8, w_out=2, conv_filters=2, conv_kernel=3,
                        lstm1_units=3, lstm2_units=5, dense_units=4)
    net = build_network(cfg, seed=21)
    rng = np.random.default_rng(22)
    _check_network(net, rng.uniform(0, 1, (5, 8, 1)), rng.uniform(0, 1, (5, 2)))


def test_param_vector_roundtrip():
    cfg = NetworkConfig(w_in=6, w_out=1, conv_filters=2, conv_kernel=3,
                        lstm1_units=3, lstm2_units=4, dense_units=3)
    net = build_network(cfg, seed=0)
    vec = net.get_params()
    assert vec.size == net.n_params()
    net.set_params(vec * 2.0)
    np.testing.assert_allclose(net.get_params(), vec * 2.0, atol=0)
    with pytest.raises(ValueError, match="flat vector"):
        net.set_params(vec[:-1])


def test_forward_rejects_non_finite_input():
    net = build_network(
        NetworkConfig(w_in=6, w_out=1, conv_filters=2, conv_kernel=3,
                      lstm1_units=3, lstm2_units=4, dense_units=3),
        seed=0,
    )
    x = np.full((1, 6, 1), np.nan)
    with pytest.raises(ValueError, match="non-finite"):
        net.forward(x)
