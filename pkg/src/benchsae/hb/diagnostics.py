"""Convergence diagnostics for retained Gibbs draws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .model import ChainDraws

DEFAULT_LAGS = (1, 5, 10)


def autocorrelation(x, lags: Sequence[int] = DEFAULT_LAGS) -> np.ndarray:
    """Sample autocorrelation of a 1-d series at the given lags (NaN if undefined)."""
    x = np.asarray(x, dtype=float)
    xc = x - x.mean()
    denom = xc @ xc
    out = np.full(len(lags), np.nan)
    if denom <= 0:
        return out
    for k, lag in enumerate(lags):
        if 0 < lag < len(x):
            out[k] = (xc[:-lag] @ xc[lag:]) / denom
        elif lag == 0:
            out[k] = 1.0
    return out


def _acf_fft(x: np.ndarray) -> np.ndarray:
    n = len(x)
    xc = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0]


def effective_sample_size(x) -> float:
    """ESS by Geyer's initial monotone positive sequence of paired autocorrelations."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4 or np.var(x) == 0:
        return float(n)
    rho = _acf_fft(x)
    pairs = []
    for t in range(0, n - 1, 2):
        gamma = rho[t] + rho[t + 1]
        if gamma <= 0:
            break
        pairs.append(gamma)
    pairs = np.minimum.accumulate(np.array(pairs)) if pairs else np.array([1.0])
    tau = -1.0 + 2.0 * pairs.sum()
    return float(n / max(tau, 1.0 / n))


def scale_reduction(chains) -> float:
    """Scale-reduction statistic ``sqrt((W + B) / W)``.

    ``W`` is the mean within-chain variance and ``B`` the variance of the
    chain means (both divide-by-n), so ``W + B`` is the pooled variance and
    identical chains give exactly 1.
    """
    arr = np.asarray(chains, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 2:
        raise ValueError("need a (chains, draws) array with at least 2 chains")
    within = float(arr.var(axis=1).mean())
    between = float(arr.mean(axis=1).var())
    if within == 0:
        return 1.0 if between == 0 else float("inf")
    return float(np.sqrt((within + between) / within))


def batch_means_se(x, n_batches: int = 50) -> float:
    """Monte Carlo standard error of the mean of an autocorrelated series."""
    x = np.asarray(x, dtype=float)
    size = len(x) // n_batches
    if size < 1:
        raise ValueError("series shorter than the number of batches")
    means = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


@dataclass
class ParameterDiagnostics:
    name: str
    autocorrelation: dict[int, float]
    ess: float
    rhat: float | None
    traces: list[np.ndarray] = field(repr=False)


@dataclass
class DiagnosticReport:
    parameters: list[ParameterDiagnostics]
    acceptance_rates: list[float]

    def to_text(self) -> str:
        lags = sorted(self.parameters[0].autocorrelation) if self.parameters else list(DEFAULT_LAGS)
        head = ["parameter"] + [f"acf{lag}" for lag in lags] + ["ess", "rhat"]
        lines = ["# MCMC diagnostics", "# " + "\t".join(head)]
        for p in self.parameters:
            acf = [f"{p.autocorrelation[lag]:.6f}" for lag in lags]
            rhat = "NA" if p.rhat is None else f"{p.rhat:.6f}"
            lines.append("\t".join([p.name, *acf, f"{p.ess:.2f}", rhat]))
        rates = ", ".join(f"{r:.6f}" for r in self.acceptance_rates)
        lines.append(f"# theta rejection-sampler acceptance rate per chain: {rates}")
        return "\n".join(lines) + "\n"


def default_monitored(chain: ChainDraws) -> list[str]:
    names = [f"beta[{j}]" for j in range(chain.beta.shape[1])] + ["sigma2_e", "sigma2_u"]
    names += [f"u[{i}]" for i in range(min(chain.u.shape[1], 5))]
    return names


def mcmc_diagnostics(
    draws: "ChainDraws | Sequence[ChainDraws]",
    monitored: Sequence[str] | None = None,
    lags: Sequence[int] = DEFAULT_LAGS,
) -> DiagnosticReport:
    """Autocorrelations, ESS and (with two or more chains) scale reduction.

    ESS is summed over chains; autocorrelations are averaged over chains.
    """
    chains = [draws] if isinstance(draws, ChainDraws) else list(draws)
    if monitored is None:
        monitored = default_monitored(chains[0])
    out = []
    for name in monitored:
        traces = [np.asarray(c.series(name), dtype=float) for c in chains]
        acf = np.nanmean([autocorrelation(t, lags) for t in traces], axis=0) if traces else []
        ess = float(sum(effective_sample_size(t) for t in traces))
        rhat = None
        if len(traces) >= 2:
            n = min(len(t) for t in traces)
            rhat = scale_reduction([t[:n] for t in traces])
        out.append(ParameterDiagnostics(name, {lag: float(a) for lag, a in zip(lags, acf)}, ess, rhat, traces))
    return DiagnosticReport(out, [c.acceptance_rate for c in chains])
