"""Dense and convolution primitives with explicit reverse-mode backward passes."""

from __future__ import annotations

import numpy as np


def _im2col(xp: np.ndarray, k: int, stride: int):
    """Sliding k x k windows of a padded (H,W,C) array -> (Ho, Wo, k*k*C)."""
    H, W, C = xp.shape
    Ho = (H - k) // stride + 1
    Wo = (W - k) // stride + 1
    s0, s1, s2 = xp.strides
    win = np.lib.stride_tricks.as_strided(
        xp, shape=(Ho, Wo, k, k, C), strides=(s0 * stride, s1 * stride, s0, s1, s2),
        writeable=False)
    return np.ascontiguousarray(win).reshape(Ho, Wo, k * k * C)


def conv2d_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int = 1):
    """3x3 convolution with pad 1 over (H,W,Cin); w is (k,k,Cin,Cout).

    Returns (y, cache). Output spatial size is H/stride for even H.
    """
    k = w.shape[0]
    pad = k // 2
    xp = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    cols = _im2col(xp, k, stride)  # (Ho,Wo,kkC)
    Ho, Wo, _ = cols.shape
    y = cols.reshape(Ho * Wo, -1) @ w.reshape(-1, w.shape[-1])
    y = y.reshape(Ho, Wo, -1) + b
    return y, (cols, x.shape, w, stride)


def conv2d_backward(grad_y: np.ndarray, cache):
    cols, x_shape, w, stride = cache
    k = w.shape[0]
    pad = k // 2
    Ho, Wo, _ = cols.shape
    Cout = w.shape[-1]
    g = grad_y.reshape(Ho * Wo, Cout)
    grad_w = (cols.reshape(Ho * Wo, -1).T @ g).reshape(w.shape)
    grad_b = g.sum(axis=0)
    dcols = (g @ w.reshape(-1, Cout).T).reshape(Ho, Wo, k, k, x_shape[2])
    H, W, C = x_shape
    dxp = np.zeros((H + 2 * pad, W + 2 * pad, C), dtype=grad_y.dtype)
    for i in range(k):
        for j in range(k):
            dxp[i:i + stride * Ho:stride, j:j + stride * Wo:stride] += dcols[:, :, i, j, :]
    return dxp[pad:pad + H, pad:pad + W], grad_w, grad_b


def upsample2x_forward(x: np.ndarray):
    return np.repeat(np.repeat(x, 2, axis=0), 2, axis=1), x.shape


def upsample2x_backward(grad_y: np.ndarray, x_shape):
    H, W, C = x_shape
    return grad_y.reshape(H, 2, W, 2, C).sum(axis=(1, 3))


def leaky_relu_forward(x: np.ndarray, slope: float = 0.2):
    return np.where(x > 0, x, slope * x), (x > 0, slope)


def leaky_relu_backward(grad_y: np.ndarray, cache):
    pos, slope = cache
    return np.where(pos, grad_y, slope * grad_y)


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0), x > 0


def relu_backward(grad_y: np.ndarray, pos):
    return np.where(pos, grad_y, 0)


def linear_forward(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    return x @ w + b, (x, w)


def linear_backward(grad_y: np.ndarray, cache):
    x, w = cache
    return grad_y @ w.T, x.T @ grad_y, grad_y.sum(axis=0)


def sigmoid_forward(x: np.ndarray):
    y = 1.0 / (1.0 + np.exp(-x))
    return y, y


def sigmoid_backward(grad_y: np.ndarray, y):
    return grad_y * y * (1.0 - y)
