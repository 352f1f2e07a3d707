"""Numba-jitted kernel implementations.

Same signatures and semantics as ``numpy_impl``; loops are fused to cut
temporary allocations and dispatch overhead on the small matrices this
package trains on. Reductions run in plain sequential order, so results can
differ from the numpy path by reduction-order rounding only.
"""

import numpy as np
from numba import njit

_F = "float64"


@njit(cache=True)
def leaky_relu_forward(x, slope):
    out = np.empty_like(x)
    bad = -1
    n, m = x.shape
    for i in range(n):
        for j in range(m):
            v = x[i, j]
            if bad < 0 and not np.isfinite(v):
                bad = i * m + j
            out[i, j] = v if v >= 0.0 else slope * v
    return out, bad


@njit(cache=True)
def leaky_relu_backward(x, gy, slope):
    out = np.empty_like(gy)
    n, m = x.shape
    for i in range(n):
        for j in range(m):
            out[i, j] = gy[i, j] if x[i, j] >= 0.0 else slope * gy[i, j]
    return out


@njit(cache=True)
def batchnorm_train_forward(x, gamma, beta, eps):
    n, m = x.shape
    mean = np.zeros(m)
    var = np.zeros(m)
    for i in range(n):
        for j in range(m):
            mean[j] += x[i, j]
    for j in range(m):
        mean[j] /= n
    for i in range(n):
        for j in range(m):
            d = x[i, j] - mean[j]
            var[j] += d * d
    inv_std = np.empty(m)
    for j in range(m):
        var[j] /= n
        inv_std[j] = 1.0 / np.sqrt(var[j] + eps)
    xhat = np.empty_like(x)
    y = np.empty_like(x)
    for i in range(n):
        for j in range(m):
            h = (x[i, j] - mean[j]) * inv_std[j]
            xhat[i, j] = h
            y[i, j] = gamma[j] * h + beta[j]
    return y, xhat, mean, var, inv_std


@njit(cache=True)
def batchnorm_infer_forward(x, gamma, beta, running_mean, running_var, eps):
    n, m = x.shape
    y = np.empty_like(x)
    inv_std = np.empty(m)
    for j in range(m):
        inv_std[j] = 1.0 / np.sqrt(running_var[j] + eps)
    for i in range(n):
        for j in range(m):
            y[i, j] = gamma[j] * ((x[i, j] - running_mean[j]) * inv_std[j]) + beta[j]
    return y


@njit(cache=True)
def batchnorm_backward(gy, xhat, gamma, inv_std):
    n, m = gy.shape
    dgamma = np.zeros(m)
    dbeta = np.zeros(m)
    s1 = np.zeros(m)
    s2 = np.zeros(m)
    for i in range(n):
        for j in range(m):
            g = gy[i, j]
            h = xhat[i, j]
            dgamma[j] += g * h
            dbeta[j] += g
            dxh = g * gamma[j]
            s1[j] += dxh
            s2[j] += dxh * h
    dx = np.empty_like(gy)
    for i in range(n):
        for j in range(m):
            dxh = gy[i, j] * gamma[j]
            dx[i, j] = (inv_std[j] / n) * (n * dxh - s1[j] - xhat[i, j] * s2[j])
    return dx, dgamma, dbeta


@njit(cache=True)
def layernorm_forward(x, gamma, beta, eps):
    n, m = x.shape
    y = np.empty_like(x)
    xhat = np.empty_like(x)
    inv_std = np.empty(n)
    for i in range(n):
        mu = 0.0
        for j in range(m):
            mu += x[i, j]
        mu /= m
        var = 0.0
        for j in range(m):
            d = x[i, j] - mu
            var += d * d
        var /= m
        isd = 1.0 / np.sqrt(var + eps)
        inv_std[i] = isd
        for j in range(m):
            h = (x[i, j] - mu) * isd
            xhat[i, j] = h
            y[i, j] = gamma[j] * h + beta[j]
    return y, xhat, inv_std


@njit(cache=True)
def layernorm_backward(gy, xhat, gamma, inv_std):
    n, m = gy.shape
    dgamma = np.zeros(m)
    dbeta = np.zeros(m)
    dx = np.empty_like(gy)
    for i in range(n):
        s1 = 0.0
        s2 = 0.0
        for j in range(m):
            g = gy[i, j]
            h = xhat[i, j]
            dgamma[j] += g * h
            dbeta[j] += g
            dxh = g * gamma[j]
            s1 += dxh
            s2 += dxh * h
        for j in range(m):
            dxh = gy[i, j] * gamma[j]
            dx[i, j] = (inv_std[i] / m) * (m * dxh - s1 - xhat[i, j] * s2)
    return dx, dgamma, dbeta


@njit(f"void({_F}[::1], {_F}[::1], {_F}[::1], {_F}[::1], {_F}, {_F}, {_F}, {_F}, int64)", cache=True)
def adam_update(p, g, m, v, lr, beta1, beta2, eps, t):
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i in range(p.shape[0]):
        gi = g[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi
        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi
        p[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


@njit(cache=True)
def pinball_loss_sum(y, yhat, level):
    total = 0.0
    yf = y.ravel()
    pf = yhat.ravel()
    for i in range(yf.shape[0]):
        d = yf[i] - pf[i]
        total += level * d if d >= 0.0 else (level - 1.0) * d
    return total


@njit(cache=True)
def pinball_grad(y, yhat, level):
    out = np.empty_like(yhat)
    yf = y.ravel()
    pf = yhat.ravel()
    of = out.ravel()
    for i in range(yf.shape[0]):
        of[i] = -level if yf[i] - pf[i] > 0.0 else 1.0 - level
    return out


@njit(cache=True)
def softmax_rows(s):
    n, m = s.shape
    p = np.empty_like(s)
    for i in range(n):
        mx = s[i, 0]
        for j in range(1, m):
            if s[i, j] > mx:
                mx = s[i, j]
        tot = 0.0
        for j in range(m):
            e = np.exp(s[i, j] - mx)
            p[i, j] = e
            tot += e
        for j in range(m):
            p[i, j] /= tot
    return p


@njit(cache=True)
def softmax_rows_backward(p, gp):
    n, m = p.shape
    ds = np.empty_like(p)
    for i in range(n):
        inner = 0.0
        for j in range(m):
            inner += gp[i, j] * p[i, j]
        for j in range(m):
            ds[i, j] = p[i, j] * (gp[i, j] - inner)
    return ds


@njit(cache=True)
def pairwise_sq_dists(a, b):
    na, d = a.shape
    nb = b.shape[0]
    out = np.empty((na, nb))
    for i in range(na):
        for j in range(nb):
            acc = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                acc += diff * diff
            out[i, j] = acc
    return out
