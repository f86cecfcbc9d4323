"""Differentiable layers: dense, 1D convolution, LSTM.

Every layer follows the same protocol:

* parameters live in float64 numpy arrays owned by the layer;
* ``forward(x)`` consumes a batch-first array, caches what the backward
  pass needs, and returns the output;
* ``backward(grad)`` consumes the loss gradient w.r.t. the output,
  accumulates parameter gradients in ``self.g_*`` arrays, and returns the
  gradient w.r.t. the input;
* ``param_views()`` / ``grad_views()`` yield the parameter and gradient
  arrays in the layer's canonical flattening order (weights before
  biases, row-major).

Layers are single-threaded per instance: forward/backward share a cache.
"""

from __future__ import annotations

import numpy as np

from .activations import activation_grad, sigmoid, KINDS


def glorot_uniform(rng: np.random.Generator, shape, fan_in: int, fan_out: int):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class DenseLayer:
    """Fully connected layer ``y = act(W @ x + b)``.

    Accepts input of shape (..., in_dim); the transform is applied to the
    last axis, so the same layer serves both flat vectors and per-step
    application over a sequence.
    """

    def __init__(self, in_dim: int, out_dim: int, act: str = "linear"):
        if act not in KINDS:
            raise ValueError(f"unknown activation {act!r}")
        if in_dim < 1 or out_dim < 1:
            raise ValueError("dense dims must be positive")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.act = act
        self.W = np.zeros((out_dim, in_dim))
        self.b = np.zeros(out_dim)
        self.g_W = np.zeros_like(self.W)
        self.g_b = np.zeros_like(self.b)
        self._cache = None

    def init_params(self, rng: np.random.Generator) -> None:
        self.W = glorot_uniform(rng, self.W.shape, self.in_dim, self.out_dim)
        self.b = np.zeros(self.out_dim)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ValueError(
                f"dense expects last axis {self.in_dim}, got {x.shape[-1]}"
            )
        z = x @ self.W.T + self.b
        self._cache = (x, z)
        if self.act == "linear":
            return z
        if self.act == "relu":
            return np.maximum(0.0, z)
        if self.act == "tanh":
            return np.tanh(z)
        return sigmoid(z)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        x, z = self._cache
        dz = grad * activation_grad(self.act, z) if self.act != "linear" else grad
        flat_x = x.reshape(-1, self.in_dim)
        flat_dz = dz.reshape(-1, self.out_dim)
        self.g_W += flat_dz.T @ flat_x
        self.g_b += flat_dz.sum(axis=0)
        return dz @ self.W

    def zero_grads(self) -> None:
        self.g_W[:] = 0.0
        self.g_b[:] = 0.0

    def param_views(self):
        return [self.W, self.b]

    def grad_views(self):
        return [self.g_W, self.g_b]


class Conv1DLayer:
    """Temporal convolution (cross-correlation), valid padding, stride 1.

    Input (B, T, in_channels) -> output (B, T - kernel_size + 1, filters),
    pre-activation ``z[b,t,f] = sum_{c,k} x[b,t+k,c] * K[f,c,k] + bias[f]``
    followed by ReLU.
    """

    def __init__(self, in_channels: int, filters: int, kernel_size: int):
        if filters < 1 or kernel_size < 1 or in_channels < 1:
            raise ValueError("conv dims must be positive")
        self.in_channels = in_channels
        self.filters = filters
        self.kernel_size = kernel_size
        self.K = np.zeros((filters, in_channels, kernel_size))
        self.b = np.zeros(filters)
        self.g_K = np.zeros_like(self.K)
        self.g_b = np.zeros_like(self.b)
        self._cache = None

    def init_params(self, rng: np.random.Generator) -> None:
        fan_in = self.in_channels * self.kernel_size
        fan_out = self.filters * self.kernel_size
        self.K = glorot_uniform(rng, self.K.shape, fan_in, fan_out)
        self.b = np.zeros(self.filters)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.in_channels:
            raise ValueError(
                f"conv expects (batch, T, {self.in_channels}), got {x.shape}"
            )
        T = x.shape[1]
        L = T - self.kernel_size + 1
        if L < 1:
            raise ValueError(
                f"sequence length {T} shorter than kernel {self.kernel_size}"
            )
        z = np.broadcast_to(self.b, (x.shape[0], L, self.filters)).copy()
        for k in range(self.kernel_size):
            z += x[:, k : k + L, :] @ self.K[:, :, k].T
        self._cache = (x, z, L)
        return np.maximum(0.0, z)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        x, z, L = self._cache
        dz = grad * (z > 0.0)
        self.g_b += dz.sum(axis=(0, 1))
        dx = np.zeros_like(x)
        for k in range(self.kernel_size):
            self.g_K[:, :, k] += np.einsum("blf,blc->fc", dz, x[:, k : k + L, :])
            dx[:, k : k + L, :] += dz @ self.K[:, :, k]
        return dx

    def zero_grads(self) -> None:
        self.g_K[:] = 0.0
        self.g_b[:] = 0.0

    def param_views(self):
        return [self.K, self.b]

    def grad_views(self):
        return [self.g_K, self.g_b]


class LstmLayer:
    """LSTM over a full sequence, returning every hidden state.

    Gate equations, with [h_{t-1}, x_t] concatenated in that order:

        f_t = sigmoid(W_f [h,x] + b_f)        forget
        i_t = sigmoid(W_i [h,x] + b_i)        input
        c_t = tanh(W_c [h,x] + b_c)           candidate cell
        C_t = f_t * C_{t-1} + i_t * c_t       cell update
        o_t = sigmoid(W_o [h,x] + b_o)        output
        h_t = o_t * tanh(C_t)

    Internally the four gate matrices are fused into one (u+d, 4u) matrix
    with column blocks in f, i, c, o order so each step is a single GEMM.
    ``param_views`` still exposes the per-gate (units, units+input_dim)
    matrices for the canonical flattening.

    State (h, C) starts at zeros for each forward call.
    """

    GATES = 4  # f, i, c, o

    def __init__(self, input_dim: int, units: int):
        if input_dim < 1 or units < 1:
            raise ValueError("lstm dims must be positive")
        self.input_dim = input_dim
        self.units = units
        self.Wz = np.zeros((units + input_dim, self.GATES * units))
        self.bz = np.zeros(self.GATES * units)
        self.g_Wz = np.zeros_like(self.Wz)
        self.g_bz = np.zeros_like(self.bz)
        self._cache = None

    def init_params(self, rng: np.random.Generator) -> None:
        fan_in = self.units + self.input_dim
        # draw gate by gate (f, i, c, o) so the init sequence matches the
        # canonical parameter order
        for g in range(self.GATES):
            u = self.units
            self.Wz[:, g * u : (g + 1) * u] = glorot_uniform(
                rng, (fan_in, u), fan_in, u
            )
        self.bz = np.zeros(self.GATES * self.units)

    def step(self, h, C, x_t):
        """One cell step; returns (h_new, C_new) without touching the cache."""
        concat = np.concatenate([h, x_t], axis=-1)
        u = self.units
        zs = concat @ self.Wz + self.bz
        f = sigmoid(zs[..., :u])
        i = sigmoid(zs[..., u : 2 * u])
        c = np.tanh(zs[..., 2 * u : 3 * u])
        o = sigmoid(zs[..., 3 * u :])
        C_new = f * C + i * c
        h_new = o * np.tanh(C_new)
        return h_new, C_new

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 3 or x.shape[2] != self.input_dim:
            raise ValueError(
                f"lstm expects (batch, T, {self.input_dim}), got {x.shape}"
            )
        B, T, _ = x.shape
        if T < 1:
            raise ValueError("empty sequence")
        u = self.units
        h = np.zeros((B, u))
        C = np.zeros((B, u))
        H = np.empty((B, T, u))
        steps = []
        for t in range(T):
            concat = np.concatenate([h, x[:, t, :]], axis=1)
            zs = concat @ self.Wz + self.bz
            f = sigmoid(zs[:, :u])
            i = sigmoid(zs[:, u : 2 * u])
            c = np.tanh(zs[:, 2 * u : 3 * u])
            o = sigmoid(zs[:, 3 * u :])
            C_new = f * C + i * c
            tC = np.tanh(C_new)
            h = o * tC
            H[:, t, :] = h
            steps.append((concat, f, i, c, o, C, tC))
            C = C_new
        self._cache = (x.shape, steps)
        return H

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        (B, T, d), steps = self._cache
        u = self.units
        dx = np.empty((B, T, d))
        dh_next = np.zeros((B, u))
        dC_next = np.zeros((B, u))
        dz = np.empty((B, self.GATES * u))
        for t in range(T - 1, -1, -1):
            concat, f, i, c, o, C_prev, tC = steps[t]
            dh = grad[:, t, :] + dh_next
            do = dh * tC
            dC = dC_next + dh * o * (1.0 - tC * tC)
            dz[:, :u] = (dC * C_prev) * f * (1.0 - f)
            dz[:, u : 2 * u] = (dC * c) * i * (1.0 - i)
            dz[:, 2 * u : 3 * u] = (dC * i) * (1.0 - c * c)
            dz[:, 3 * u :] = do * o * (1.0 - o)
            dC_next = dC * f
            self.g_Wz += concat.T @ dz
            self.g_bz += dz.sum(axis=0)
            dconcat = dz @ self.Wz.T
            dh_next = dconcat[:, :u]
            dx[:, t, :] = dconcat[:, u:]
        return dx

    def zero_grads(self) -> None:
        self.g_Wz[:] = 0.0
        self.g_bz[:] = 0.0

    def _gate_views(self, fused_W, fused_b):
        u = self.units
        weights = [fused_W[:, g * u : (g + 1) * u].T for g in range(self.GATES)]
        biases = [fused_b[g * u : (g + 1) * u] for g in range(self.GATES)]
        return weights + biases

    def param_views(self):
        # W_f, W_i, W_c, W_o (each (units, units+input_dim)), then b_f..b_o
        return self._gate_views(self.Wz, self.bz)

    def grad_views(self):
        return self._gate_views(self.g_Wz, self.g_bz)


class FlattenLayer:
    """Reshape (B, L, d) -> (B, L*d), step-major (all features of step 0 first)."""

    def __init__(self):
        self._shape = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 3:
            raise ValueError(f"flatten expects a 3-d input, got shape {x.shape}")
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        if self._shape is None:
            raise RuntimeError("backward called before forward")
        return grad.reshape(self._shape)

    def zero_grads(self) -> None:
        pass

    def param_views(self):
        return []

    def grad_views(self):
        return []
