"""Compiled kernels for the logistic-normal Gibbs sampler.

Mirrors :mod:`._numpy` draw for draw; only the arithmetic is looped.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

OK, NONFINITE, REJECTION_STALLED = 0, 1, 2


@njit(cache=True)
def _cholesky(A):
    n = A.shape[0]
    L = np.zeros_like(A)
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= 0.0:
            L[0, 0] = np.nan
            return L
        L[j, j] = math.sqrt(s)
        for i in range(j + 1, n):
            t = A[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    return L


@njit(cache=True)
def _forward(L, b):
    n = b.shape[0]
    x = np.empty(n)
    for i in range(n):
        t = b[i]
        for k in range(i):
            t -= L[i, k] * x[k]
        x[i] = t / L[i, i]
    return x


@njit(cache=True)
def _backward_t(L, b):
    # solves L^T x = b
    n = b.shape[0]
    x = np.empty(n)
    for i in range(n - 1, -1, -1):
        t = b[i]
        for k in range(i + 1, n):
            t -= L[k, i] * x[k]
        x[i] = t / L[i, i]
    return x


@njit(cache=True)
def sample_theta_block(rng, y, mu, sd, theta, max_rounds):
    n = mu.shape[0]
    pending = np.arange(n)
    npend = n
    proposals = 0
    rounds = 0
    while npend > 0:
        rounds += 1
        if rounds > max_rounds:
            return REJECTION_STALLED, proposals
        z = rng.standard_normal(npend)
        v = rng.random(npend)
        keep = 0
        for t in range(npend):
            k = pending[t]
            prop = mu[k] + sd * z[t]
            sign = 2.0 * y[k] - 1.0
            prob = 1.0 / (1.0 + math.exp(-sign * prop))
            if v[t] < prob:
                theta[k] = prop
            else:
                pending[keep] = k
                keep += 1
        proposals += npend
        npend = keep
    return OK, proposals


@njit(cache=True)
def _sweep(rng, X, area, sizes, y, hyper, prior_prec, XtX, beta, u, theta, scal, max_rounds):
    a, b, c, d = hyper[0], hyper[1], hyper[2], hyper[3]
    n_units, p = X.shape
    m = sizes.shape[0]
    s2e, s2u = scal[0], scal[1]

    # beta | rest
    Xtr = np.zeros(p)
    for k in range(n_units):
        r = theta[k] - u[area[k]]
        for j in range(p):
            Xtr[j] += X[k, j] * r
    prec = XtX / s2e + prior_prec
    L = _cholesky(prec)
    if not np.isfinite(L[0, 0]):
        return NONFINITE, 0
    z = rng.standard_normal(p)
    mean = _backward_t(L, _forward(L, Xtr / s2e))
    noise = _backward_t(L, z)
    for j in range(p):
        beta[j] = mean[j] + noise[j]

    # u | rest
    xb = np.empty(n_units)
    sum_e = np.zeros(m)
    for k in range(n_units):
        t = 0.0
        for j in range(p):
            t += X[k, j] * beta[j]
        xb[k] = t
        sum_e[area[k]] += theta[k] - t
    z = rng.standard_normal(m)
    for i in range(m):
        D = 1.0 / (sizes[i] / s2e + 1.0 / s2u)
        u[i] = D * sum_e[i] / s2e + math.sqrt(D) * z[i]

    # variances
    ss = 0.0
    for k in range(n_units):
        r = theta[k] - xb[k] - u[area[k]]
        ss += r * r
    s2e = 0.5 * (a + ss) / rng.gamma(0.5 * (b + n_units))
    uu = 0.0
    for i in range(m):
        uu += u[i] * u[i]
    s2u = 0.5 * (c + uu) / rng.gamma(0.5 * (d + m))
    scal[0] = s2e
    scal[1] = s2u

    # theta | rest
    mu = np.empty(n_units)
    for k in range(n_units):
        mu[k] = xb[k] + u[area[k]]
    status, proposals = sample_theta_block(rng, y, mu, math.sqrt(s2e), theta, max_rounds)
    if status != OK:
        return status, proposals
    for j in range(p):
        if not np.isfinite(beta[j]):
            return NONFINITE, proposals
    for i in range(m):
        if not np.isfinite(u[i]):
            return NONFINITE, proposals
    if not (np.isfinite(s2e) and np.isfinite(s2u) and s2e > 0.0 and s2u > 0.0):
        return NONFINITE, proposals
    return OK, proposals


@njit(cache=True)
def run_gibbs(
    rng, X, area, sizes, y, hyper, prior_prec, beta, u, theta, scal,
    n_iter, burn_in, thin, regenerate_y, max_rounds,
    out_beta, out_u, out_theta, out_scal, out_iter, out_y,
):
    n_units, p = X.shape
    XtX = np.zeros((p, p))
    for k in range(n_units):
        for i in range(p):
            for j in range(p):
                XtX[i, j] += X[k, i] * X[k, j]
    proposals = 0
    slot = 0
    for it in range(1, n_iter + 1):
        status, props = _sweep(rng, X, area, sizes, y, hyper, prior_prec, XtX, beta, u, theta, scal, max_rounds)
        proposals += props
        if status != OK:
            return status, it, proposals
        if regenerate_y:
            v = rng.random(n_units)
            for k in range(n_units):
                y[k] = 1.0 if v[k] < 1.0 / (1.0 + math.exp(-theta[k])) else 0.0
        if it > burn_in and (it - burn_in) % thin == 0:
            out_beta[slot, :] = beta
            out_u[slot, :] = u
            out_theta[slot, :] = theta
            out_scal[slot, :] = scal
            out_iter[slot] = it
            if regenerate_y:
                out_y[slot, :] = y
            slot += 1
    return OK, 0, proposals
