"""Layer container with a flat parameter vector and MSE loss/gradient.

The flattening order is the layer order, and within each layer the order
reported by ``param_views()`` (weights before biases, row-major). This
order defines both the gradient vector and the on-disk weight layout.
"""

from __future__ import annotations

import numpy as np


class Network:
    def __init__(self, layers):
        if not layers:
            raise ValueError("network needs at least one layer")
        self.layers = list(layers)

    # ---- parameter vector ------------------------------------------------

    def n_params(self) -> int:
        return sum(v.size for l in self.layers for v in l.param_views())

    def get_params(self) -> np.ndarray:
        views = [v for l in self.layers for v in l.param_views()]
        if not views:
            return np.zeros(0)
        return np.concatenate([np.ravel(v) for v in views])

    def set_params(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.ndim != 1 or vec.size != self.n_params():
            raise ValueError(
                f"expected flat vector of {self.n_params()} params, got {vec.shape}"
            )
        off = 0
        for layer in self.layers:
            for view in layer.param_views():
                n = view.size
                view[...] = vec[off : off + n].reshape(view.shape)
                off += n

    def get_grads(self) -> np.ndarray:
        views = [v for l in self.layers for v in l.grad_views()]
        if not views:
            return np.zeros(0)
        return np.concatenate([np.ravel(v) for v in views])

    def zero_grads(self) -> None:
        for layer in self.layers:
            layer.zero_grads()

    # ---- forward / loss / backward ----------------------------------------

    def forward(self, x: np.ndarray, validate: bool = True) -> np.ndarray:
        out = np.asarray(x, dtype=np.float64)
        if validate and not np.all(np.isfinite(out)):
            raise ValueError("non-finite values in network input")
        for layer in self.layers:
            out = layer.forward(out)
        if validate and not np.all(np.isfinite(out)):
            raise ValueError("non-finite values in network output")
        return out

    def loss(self, x: np.ndarray, y: np.ndarray, validate: bool = False) -> float:
        """Mean squared error of the forward pass against targets ``y``."""
        pred = self.forward(x, validate=validate)
        y = np.asarray(y, dtype=np.float64)
        if pred.shape != y.shape:
            raise ValueError(f"prediction shape {pred.shape} != target {y.shape}")
        diff = pred - y
        return float(np.mean(diff * diff))

    def loss_and_grad(self, x: np.ndarray, y: np.ndarray):
        """MSE loss plus its exact gradient w.r.t. the flat parameter vector.

        Gradients are accumulated from a fresh zero state, so each call
        returns the gradient of this batch alone.
        """
        pred = self.forward(x, validate=False)
        y = np.asarray(y, dtype=np.float64)
        if pred.shape != y.shape:
            raise ValueError(f"prediction shape {pred.shape} != target {y.shape}")
        diff = pred - y
        loss = float(np.mean(diff * diff))
        self.zero_grads()
        grad_out = (2.0 / diff.size) * diff
        for layer in reversed(self.layers):
            grad_out = layer.backward(grad_out)
        return loss, self.get_grads()
