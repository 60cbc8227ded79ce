"""numba-compiled kernels; the default backend.

Single-threaded @njit loops: fused, allocation-light, and deterministic.
Each routine matches the numpy backend's contract exactly.
"""

import numpy as np
from numba import njit

NAME = "numba"


@njit(cache=True)
def softmax_rows(x):
    n, c = x.shape
    out = np.empty((n, c))
    for i in range(n):
        row_max = x[i, 0]
        for j in range(1, c):
            if x[i, j] > row_max:
                row_max = x[i, j]
        total = 0.0
        for j in range(c):
            e = np.exp(x[i, j] - row_max)
            out[i, j] = e
            total += e
        for j in range(c):
            out[i, j] /= total
    return out


@njit(cache=True)
def softmax_rows_backward(y, gy):
    n, c = y.shape
    dx = np.empty((n, c))
    for i in range(n):
        dot = 0.0
        for j in range(c):
            dot += gy[i, j] * y[i, j]
        for j in range(c):
            dx[i, j] = (gy[i, j] - dot) * y[i, j]
    return dx


@njit(cache=True)
def log_softmax_rows(x):
    n, c = x.shape
    out = np.empty((n, c))
    for i in range(n):
        row_max = x[i, 0]
        for j in range(1, c):
            if x[i, j] > row_max:
                row_max = x[i, j]
        total = 0.0
        for j in range(c):
            total += np.exp(x[i, j] - row_max)
        lse = np.log(total)
        for j in range(c):
            out[i, j] = x[i, j] - row_max - lse
    return out


@njit(cache=True)
def log_softmax_rows_backward(probs, gy):
    n, c = probs.shape
    dx = np.empty((n, c))
    for i in range(n):
        total = 0.0
        for j in range(c):
            total += gy[i, j]
        for j in range(c):
            dx[i, j] = gy[i, j] - probs[i, j] * total
    return dx


@njit(cache=True)
def layernorm_rows(x, gain, bias, eps):
    n, h = x.shape
    y = np.empty((n, h))
    xhat = np.empty((n, h))
    rstd = np.empty((n, 1))
    for i in range(n):
        mu = 0.0
        for j in range(h):
            mu += x[i, j]
        mu /= h
        var = 0.0
        for j in range(h):
            d = x[i, j] - mu
            var += d * d
        var /= h
        r = 1.0 / np.sqrt(var + eps)
        rstd[i, 0] = r
        for j in range(h):
            xh = (x[i, j] - mu) * r
            xhat[i, j] = xh
            y[i, j] = xh * gain[j] + bias[j]
    return y, xhat, rstd


@njit(cache=True)
def layernorm_rows_backward(gy, xhat, rstd, gain):
    n, h = xhat.shape
    dx = np.empty((n, h))
    dgain = np.zeros(h)
    dbias = np.zeros(h)
    for i in range(n):
        mean_dxhat = 0.0
        mean_dxhat_xhat = 0.0
        for j in range(h):
            dgain[j] += gy[i, j] * xhat[i, j]
            dbias[j] += gy[i, j]
            dxh = gy[i, j] * gain[j]
            mean_dxhat += dxh
            mean_dxhat_xhat += dxh * xhat[i, j]
        mean_dxhat /= h
        mean_dxhat_xhat /= h
        r = rstd[i, 0]
        for j in range(h):
            dxh = gy[i, j] * gain[j]
            dx[i, j] = r * (dxh - mean_dxhat - xhat[i, j] * mean_dxhat_xhat)
    return dx, dgain, dbias


@njit(cache=True)
def adam_update(p, g, m, v, lr, beta1, beta2, eps, t):
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for i in range(p.shape[0]):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        p[i] -= lr * (m[i] / bc1) / (np.sqrt(v[i] / bc2) + eps)


@njit(cache=True)
def embedding_grad(ids, gy, gtable):
    n, h = gy.shape
    for i in range(n):
        row = ids[i]
        for j in range(h):
            gtable[row, j] += gy[i, j]
