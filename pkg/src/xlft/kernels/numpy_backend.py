"""Pure-numpy reference implementations of the hot kernels.

Selected with ``XLFT_BACKEND=numpy``; also the fallback when numba is not
importable.  The numba backend mirrors these routines loop-for-loop, so the
two agree to floating-point roundoff (summation order may differ).
"""

import numpy as np

NAME = "numpy"


def softmax_rows(x):
    """Row-wise softmax of a 2-D array, max-subtracted for stability."""
    shifted = x - x.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_backward(y, gy):
    # dx = (gy - sum(gy * y, row)) * y
    dot = (gy * y).sum(axis=1, keepdims=True)
    return (gy - dot) * y


def log_softmax_rows(x):
    shifted = x - x.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return shifted - lse


def log_softmax_rows_backward(probs, gy):
    # dx = gy - probs * sum(gy, row)
    return gy - probs * gy.sum(axis=1, keepdims=True)


def layernorm_rows(x, gain, bias, eps):
    """Normalize each row to zero mean / unit variance, then scale and shift.

    Returns (y, xhat, rstd); the latter two feed the backward pass.
    """
    mu = x.mean(axis=1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * rstd
    return xhat * gain + bias, xhat, rstd


def layernorm_rows_backward(gy, xhat, rstd, gain):
    h = xhat.shape[1]
    dgain = (gy * xhat).sum(axis=0)
    dbias = gy.sum(axis=0)
    dxhat = gy * gain
    mean_dxhat = dxhat.sum(axis=1, keepdims=True) / h
    mean_dxhat_xhat = (dxhat * xhat).sum(axis=1, keepdims=True) / h
    dx = rstd * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat)
    return dx, dgain, dbias


def adam_update(p, g, m, v, lr, beta1, beta2, eps, t):
    """One Adam step, in place on flat float64 views."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def embedding_grad(ids, gy, gtable):
    """Scatter-add gy rows into gtable at the given ids (in place)."""
    np.add.at(gtable, ids, gy)
