"""Finite-difference gradient oracle for verifying backpropagation.

Deliberately independent of the analytic backward pass: it only calls
``network.loss`` while perturbing one parameter at a time.
"""

from __future__ import annotations

import numpy as np


def finite_difference_gradient(network, x, y, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of the MSE loss w.r.t. every parameter.

    Cost is two forward passes per parameter; only use on small networks.
    """
    if h <= 0.0:
        raise ValueError("step size h must be positive")
    theta = network.get_params().copy()
    grad = np.zeros_like(theta)
    for k in range(theta.size):
        orig = theta[k]
        theta[k] = orig + h
        network.set_params(theta)
        lp = network.loss(x, y)
        theta[k] = orig - h
        network.set_params(theta)
        lm = network.loss(x, y)
        theta[k] = orig
        if not (np.isfinite(lp) and np.isfinite(lm)):
            network.set_params(theta)
            raise ValueError(f"non-finite loss while perturbing parameter {k}")
        grad[k] = (lp - lm) / (2.0 * h)
    network.set_params(theta)
    return grad


def max_relative_error(g_a: np.ndarray, g_b: np.ndarray, floor: float = 1e-6) -> float:
    """Worst-case elementwise relative discrepancy between two gradients.

    The denominator is floored so that parameters whose true gradient is
    essentially zero (where central differences only return roundoff) do
    not dominate the comparison.
    """
    g_a = np.asarray(g_a, dtype=np.float64)
    g_b = np.asarray(g_b, dtype=np.float64)
    if g_a.shape != g_b.shape:
        raise ValueError("gradient shapes differ")
    denom = np.maximum(np.maximum(np.abs(g_a), np.abs(g_b)), floor)
    return float(np.max(np.abs(g_a - g_b) / denom))
