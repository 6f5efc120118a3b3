"""Vectorised numpy kernels for the logistic-normal Gibbs sampler.

Random numbers are consumed in exactly the same order as the compiled
kernels in :mod:`._numba`, so both backends produce the same chain up to
floating-point rounding.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

OK, NONFINITE, REJECTION_STALLED = 0, 1, 2


def sample_theta_block(rng, y, mu, sd, theta, max_rounds):
    """Rejection-sample every entry of ``theta`` in place.

    Proposals come from ``N(mu, sd^2)`` and are accepted with probability
    ``expit(theta)`` when ``y = 1`` and ``1 - expit(theta)`` when ``y = 0``.
    Returns ``(status, proposals)``.
    """
    sign = 2.0 * y - 1.0
    pending = np.arange(len(mu))
    proposals = 0
    rounds = 0
    while pending.size:
        rounds += 1
        if rounds > max_rounds:
            return REJECTION_STALLED, proposals
        k = pending.size
        z = rng.standard_normal(k)
        v = rng.random(k)
        prop = mu[pending] + sd * z
        with np.errstate(over="ignore"):
            prob = 1.0 / (1.0 + np.exp(-sign[pending] * prop))
        ok = v < prob
        theta[pending[ok]] = prop[ok]
        pending = pending[~ok]
        proposals += k
    return OK, proposals


def _sweep(rng, X, area, sizes, y, hyper, prior_prec, XtX, beta, u, theta, scal, max_rounds):
    a, b, c, d = hyper
    n_units = X.shape[0]
    m = sizes.shape[0]
    s2e, s2u = scal[0], scal[1]

    # beta | rest
    Xtr = X.T @ (theta - u[area])
    prec = XtX / s2e + prior_prec
    L = np.linalg.cholesky(prec)
    z = rng.standard_normal(beta.shape[0])
    mean = scipy.linalg.cho_solve((L, True), Xtr / s2e)
    beta[:] = mean + scipy.linalg.solve_triangular(L.T, z, lower=False)

    # u | rest
    xb = X @ beta
    sum_e = np.bincount(area, weights=theta - xb, minlength=m)
    z = rng.standard_normal(m)
    D = 1.0 / (sizes / s2e + 1.0 / s2u)
    u[:] = D * sum_e / s2e + np.sqrt(D) * z

    # variances
    resid = theta - xb - u[area]
    s2e = 0.5 * (a + resid @ resid) / rng.gamma(0.5 * (b + n_units))
    s2u = 0.5 * (c + u @ u) / rng.gamma(0.5 * (d + m))
    scal[0], scal[1] = s2e, s2u

    # theta | rest
    mu = xb + u[area]
    status, proposals = sample_theta_block(rng, y, mu, np.sqrt(s2e), theta, max_rounds)
    if status != OK:
        return status, proposals
    if not (np.all(np.isfinite(beta)) and np.all(np.isfinite(u)) and np.isfinite(s2e) and np.isfinite(s2u)):
        return NONFINITE, proposals
    if not (s2e > 0 and s2u > 0):
        return NONFINITE, proposals
    return OK, proposals


def run_gibbs(
    rng, X, area, sizes, y, hyper, prior_prec, beta, u, theta, scal,
    n_iter, burn_in, thin, regenerate_y, max_rounds,
    out_beta, out_u, out_theta, out_scal, out_iter, out_y,
):
    """Run ``n_iter`` sweeps, storing every ``thin``-th state after ``burn_in``.

    State arrays are updated in place. Returns ``(status, iteration, proposals)``
    where ``iteration`` is the 1-based sweep at which a failure occurred.
    """
    XtX = X.T @ X
    proposals = 0
    slot = 0
    for it in range(1, n_iter + 1):
        status, props = _sweep(rng, X, area, sizes, y, hyper, prior_prec, XtX, beta, u, theta, scal, max_rounds)
        proposals += props
        if status != OK:
            return status, it, proposals
        if regenerate_y:
            v = rng.random(y.shape[0])
            with np.errstate(over="ignore"):
                y[:] = (v < 1.0 / (1.0 + np.exp(-theta))).astype(np.float64)
        if it > burn_in and (it - burn_in) % thin == 0:
            out_beta[slot] = beta
            out_u[slot] = u
            out_theta[slot] = theta
            out_scal[slot] = scal
            out_iter[slot] = it
            if regenerate_y:
                out_y[slot] = y
            slot += 1
    return OK, 0, proposals
