"""Versioned binary container for trained network weights.

Layout (all integers and floats little-endian):

    bytes 0-3    magic "SGCW"
    bytes 4-7    format version, u32 (currently 1)
    config block:
        w_in, w_out, conv_filters, conv_kernel,
        lstm1_units, lstm2_units, dense_units      7 x u32
        scaler_min, scaler_max                     2 x f64
        n_params                                   u64
    parameter vector, canonical flattening order   n_params x f64
    optimizer flag                                 u8 (0 or 1)
    if flag == 1 (resumable Adam state):
        t                                          u64
        lr, beta1, beta2, eps                      4 x f64
        m, v                                       2 x n_params x f64
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .adam import AdamState

MAGIC = b"SGCW"
VERSION = 1

_CONFIG_KEYS = (
    "w_in",
    "w_out",
    "conv_filters",
    "conv_kernel",
    "lstm1_units",
    "lstm2_units",
    "dense_units",
)


def save_weights(path, config: dict, params: np.ndarray, scaler_min: float,
                 scaler_max: float, adam: AdamState | None = None) -> None:
    params = np.ascontiguousarray(params, dtype="<f8")
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", VERSION)
    blob += struct.pack("<7I", *(int(config[k]) for k in _CONFIG_KEYS))
    blob += struct.pack("<2d", float(scaler_min), float(scaler_max))
    blob += struct.pack("<Q", params.size)
    blob += params.tobytes()
    if adam is None:
        blob += struct.pack("<B", 0)
    else:
        if adam.m.size != params.size:
            raise ValueError("adam state length does not match parameter vector")
        blob += struct.pack("<B", 1)
        blob += struct.pack("<Q", adam.t)
        blob += struct.pack("<4d", adam.lr, adam.beta1, adam.beta2, adam.eps)
        blob += np.ascontiguousarray(adam.m, dtype="<f8").tobytes()
        blob += np.ascontiguousarray(adam.v, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


def load_weights(path) -> dict:
    """Read a container; returns config fields, scaler, params, optional adam."""
    raw = Path(path).read_bytes()
    if len(raw) < 8 or raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a SGCW weight file")
    (version,) = struct.unpack_from("<I", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported format version {version}")
    off = 8
    cfg_vals = struct.unpack_from("<7I", raw, off)
    off += 28
    scaler_min, scaler_max = struct.unpack_from("<2d", raw, off)
    off += 16
    (n_params,) = struct.unpack_from("<Q", raw, off)
    off += 8
    end = off + 8 * n_params
    if len(raw) < end + 1:
        raise ValueError(f"{path}: truncated weight file")
    params = np.frombuffer(raw, dtype="<f8", count=n_params, offset=off).copy()
    off = end
    (flag,) = struct.unpack_from("<B", raw, off)
    off += 1
    adam = None
    if flag == 1:
        (t,) = struct.unpack_from("<Q", raw, off)
        off += 8
        lr, beta1, beta2, eps = struct.unpack_from("<4d", raw, off)
        off += 32
        m = np.frombuffer(raw, dtype="<f8", count=n_params, offset=off).copy()
        off += 8 * n_params
        v = np.frombuffer(raw, dtype="<f8", count=n_params, offset=off).copy()
        adam = AdamState(n_params=n_params, lr=lr, beta1=beta1, beta2=beta2,
                         eps=eps, t=t, m=m, v=v)
    elif flag != 0:
        raise ValueError(f"{path}: bad optimizer flag {flag}")
    return {
        "config": dict(zip(_CONFIG_KEYS, cfg_vals)),
        "scaler_min": scaler_min,
        "scaler_max": scaler_max,
        "params": params,
        "adam": adam,
    }
