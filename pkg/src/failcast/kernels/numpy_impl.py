"""Pure-numpy kernel implementations.

Reference path for every hot kernel. The numba implementations in
``numba_impl.py`` must match these within floating-point reduction-order
noise; ``benchmarks/kernel_benchmark.py`` compares the two.

All kernels take and return C-contiguous float64 arrays.
"""

import numpy as np


def leaky_relu_forward(x, slope):
    """Elementwise max(x, slope*x). Returns (y, bad_index).

    bad_index is the flat index of the first non-finite input entry,
    or -1 when all entries are finite.
    """
    finite = np.isfinite(x)
    bad = -1 if finite.all() else int(np.argmin(finite.ravel()))
    y = np.where(x >= 0.0, x, slope * x)
    return y, bad


def leaky_relu_backward(x, gy, slope):
    return np.where(x >= 0.0, gy, slope * gy)


def batchnorm_train_forward(x, gamma, beta, eps):
    """Normalize columns with batch statistics (biased variance).

    Returns (y, xhat, mean, var, inv_std); xhat and inv_std feed backward.
    """
    mean = x.mean(axis=0)
    var = np.mean((x - mean) ** 2, axis=0)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    y = gamma * xhat + beta
    return y, xhat, mean, var, inv_std


def batchnorm_infer_forward(x, gamma, beta, running_mean, running_var, eps):
    inv_std = 1.0 / np.sqrt(running_var + eps)
    return gamma * ((x - running_mean) * inv_std) + beta


def batchnorm_backward(gy, xhat, gamma, inv_std):
    """Gradient of the training-mode forward.

    dx = inv_std/N * (N*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
    with dxhat = gy*gamma, summed over the batch axis.
    """
    n = gy.shape[0]
    dgamma = np.sum(gy * xhat, axis=0)
    dbeta = np.sum(gy, axis=0)
    dxhat = gy * gamma
    s1 = np.sum(dxhat, axis=0)
    s2 = np.sum(dxhat * xhat, axis=0)
    dx = (inv_std / n) * (n * dxhat - s1 - xhat * s2)
    return dx, dgamma, dbeta


def layernorm_forward(x, gamma, beta, eps):
    """Row-wise normalization. Returns (y, xhat, inv_std)."""
    mean = x.mean(axis=1, keepdims=True)
    var = np.mean((x - mean) ** 2, axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean) * inv_std
    return gamma * xhat + beta, xhat, inv_std.ravel()


def layernorm_backward(gy, xhat, gamma, inv_std):
    d = gy.shape[1]
    dgamma = np.sum(gy * xhat, axis=0)
    dbeta = np.sum(gy, axis=0)
    dxhat = gy * gamma
    s1 = np.sum(dxhat, axis=1, keepdims=True)
    s2 = np.sum(dxhat * xhat, axis=1, keepdims=True)
    dx = (inv_std[:, None] / d) * (d * dxhat - s1 - xhat * s2)
    return dx, dgamma, dbeta


def adam_update(p, g, m, v, lr, beta1, beta2, eps, t):
    """Bias-corrected Adam step, in place on flat views of p, m, v."""
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * g * g
    mhat = m / (1.0 - beta1**t)
    vhat = v / (1.0 - beta2**t)
    p -= lr * mhat / (np.sqrt(vhat) + eps)


def pinball_loss_sum(y, yhat, level):
    d = y - yhat
    return float(np.sum(np.where(d >= 0.0, level * d, (level - 1.0) * d)))


def pinball_grad(y, yhat, level):
    """Subgradient of the pinball loss wrt yhat (d==0 uses the lower branch)."""
    d = y - yhat
    return np.where(d > 0.0, -level, 1.0 - level)


def softmax_rows(s):
    shifted = s - s.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_rows_backward(p, gp):
    # ds = p * (gp - sum(gp * p, row))
    inner = np.sum(gp * p, axis=1, keepdims=True)
    return p * (gp - inner)


def pairwise_sq_dists(a, b):
    """Squared Euclidean distances, shape (len(a), len(b)).

    Expanded-form computation; explicit accumulation happens on the numba
    path, so cross-backend agreement is approximate near ties.
    """
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    d = aa + bb - 2.0 * (a @ b.T)
    np.maximum(d, 0.0, out=d)
    return d
