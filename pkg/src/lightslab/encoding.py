"""Sinusoidal positional encoding and bilinear feature sampling with adjoint."""

from __future__ import annotations

import numpy as np


def encode_sinusoidal(x: np.ndarray, bands: int) -> np.ndarray:
    """Concatenated (sin(2^k pi c), cos(2^k pi c)) over k < bands per coordinate.

    Layout is coordinate-major, band-minor, sin before cos. Works on (..., C).
    """
    x = np.asarray(x)
    freqs = (2.0 ** np.arange(bands)) * np.pi  # (L,)
    ang = x[..., :, None] * freqs  # (..., C, L)
    out = np.stack([np.sin(ang), np.cos(ang)], axis=-1)  # (..., C, L, 2)
    return out.reshape(*x.shape[:-1], x.shape[-1] * 2 * bands)


def positional_encoding(w, bands: int) -> np.ndarray:
    """Encoding of a UV coordinate pair; entries all lie in [-1, 1]."""
    w = np.asarray(w, dtype=np.float64)
    if bands < 1:
        raise ValueError("band count must be >= 1")
    if w.min() < 0.0 or w.max() > 1.0:
        raise ValueError("uv coordinates must lie in [0,1]^2")
    return encode_sinusoidal(w, bands)


def _bilinear_setup(uv: np.ndarray, resolution: int):
    """Texel-center convention with edge clamping; returns corner indices and weights."""
    R = resolution
    x = np.clip(uv[:, 0] * R - 0.5, 0.0, R - 1.0)
    y = np.clip(uv[:, 1] * R - 0.5, 0.0, R - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), R - 2)
    y0 = np.minimum(np.floor(y).astype(np.int64), R - 2)
    fx = x - x0
    fy = y - y0
    w00 = (1 - fx) * (1 - fy)
    w01 = fx * (1 - fy)
    w10 = (1 - fx) * fy
    w11 = fx * fy
    return x0, y0, np.stack([w00, w01, w10, w11], axis=1)


def bilinear_sample(feature_map: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Sample (R,R,C) at uv rows in [0,1]^2; uv (0.5/R, 0.5/R) hits texel (0,0)."""
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    R = feature_map.shape[0]
    x0, y0, w = _bilinear_setup(uv, R)
    w = w.astype(feature_map.dtype)
    out = (feature_map[y0, x0] * w[:, 0:1] + feature_map[y0, x0 + 1] * w[:, 1:2]
           + feature_map[y0 + 1, x0] * w[:, 2:3] + feature_map[y0 + 1, x0 + 1] * w[:, 3:4])
    return out


def bilinear_sample_adjoint(grad_out: np.ndarray, uv: np.ndarray, resolution: int,
                            channels: int) -> np.ndarray:
    """Scatter gradients back into the map with the same four weights per sample."""
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    x0, y0, w = _bilinear_setup(uv, resolution)
    grad_map = np.zeros((resolution, resolution, channels), dtype=grad_out.dtype)
    w = w.astype(grad_out.dtype)
    np.add.at(grad_map, (y0, x0), grad_out * w[:, 0:1])
    np.add.at(grad_map, (y0, x0 + 1), grad_out * w[:, 1:2])
    np.add.at(grad_map, (y0 + 1, x0), grad_out * w[:, 2:3])
    np.add.at(grad_map, (y0 + 1, x0 + 1), grad_out * w[:, 3:4])
    return grad_map
