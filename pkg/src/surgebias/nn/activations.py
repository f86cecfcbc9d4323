"""Elementwise activation functions and their derivatives.

All functions accept and return float64 numpy arrays (or scalars) and are
numerically stable over the full float64 range.
"""

from __future__ import annotations

import numpy as np

KINDS = ("relu", "linear", "sigmoid", "tanh")


def relu(x):
    return np.maximum(0.0, x)


def relu_grad(x):
    # derivative taken as 0 at the kink
    return (x > 0.0).astype(np.float64)


def linear(x):
    return np.asarray(x, dtype=np.float64)


def linear_grad(x):
    return np.ones_like(np.asarray(x, dtype=np.float64))


def sigmoid(x):
    # exp(-|x|) never overflows; both branches share it
    x = np.asarray(x, dtype=np.float64)
    z = np.exp(-np.abs(x))
    return np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))


def sigmoid_grad(x):
    s = sigmoid(x)
    return s * (1.0 - s)


def tanh(x):
    return np.tanh(np.asarray(x, dtype=np.float64))


def tanh_grad(x):
    t = np.tanh(np.asarray(x, dtype=np.float64))
    return 1.0 - t * t


_FORWARD = {"relu": relu, "linear": linear, "sigmoid": sigmoid, "tanh": tanh}
_GRAD = {
    "relu": relu_grad,
    "linear": linear_grad,
    "sigmoid": sigmoid_grad,
    "tanh": tanh_grad,
}


def activation(kind: str, x):
    """Apply the named activation to ``x``.

    Raises ValueError for unknown kinds or non-finite input.
    """
    if kind not in _FORWARD:
        raise ValueError(f"unknown activation {kind!r}; expected one of {KINDS}")
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"non-finite input to activation {kind!r}")
    out = _FORWARD[kind](arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def activation_grad(kind: str, x):
    """Derivative of the named activation evaluated at ``x``."""
    if kind not in _GRAD:
        raise ValueError(f"unknown activation {kind!r}; expected one of {KINDS}")
    arr = np.asarray(x, dtype=np.float64)
    out = _GRAD[kind](arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out
