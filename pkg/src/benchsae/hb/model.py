"""Hierarchical logistic-normal model and its Gibbs sampler.

Model (``theta`` on the logit scale)::

    y_ij | theta_ij        ~ Bernoulli(expit(theta_ij))
    theta_ij | beta, u_i   ~ N(x_ij' beta + u_i, sigma2_e)
    u_i | sigma2_u         ~ N(0, sigma2_u)
    beta                   ~ flat (or N(0, P0^{-1}) when a prior precision is given)
    sigma2_e               ~ InverseGamma(scale=a/2, shape=b/2)
    sigma2_u               ~ InverseGamma(scale=c/2, shape=d/2)

Inverse-Gamma distributions are parameterised as ``(scale, shape)`` with
density proportional to ``x^-(shape+1) exp(-scale/x)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.special import expit, logit

from .. import kernels
from ..core import ConstraintWeights, PosteriorSummary, SurveyDataset, area_index, area_offsets
from ..errors import InsufficientSampleError, InvalidInputError, SamplerDivergenceError

#: sigma2_e prior: scaled inverse chi-square with 10 df centred near 1. A diffuse
#: prior here leaves the posterior improper under the flat prior on beta.
DEFAULT_SIGMA2_E_HYPER = 10.0
DEFAULT_SIGMA2_U_HYPER = 0.02
#: Rejection rounds after which a theta update is declared stalled.
MAX_REJECTION_ROUNDS = 10**6


def _ro(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class HBModelSpec:
    """Design, responses and hyperparameters of the hierarchical model.

    ``X`` is the full design matrix (intercept included). ``beta_prior_precision``
    defaults to zeros, i.e. the flat prior on ``beta``; a positive definite
    precision gives a proper ``N(0, P0^{-1})`` prior, needed for
    prior-predictive validation.
    """

    X: np.ndarray
    sizes: np.ndarray
    y: np.ndarray
    hyper_a: float = DEFAULT_SIGMA2_E_HYPER
    hyper_b: float = DEFAULT_SIGMA2_E_HYPER
    hyper_c: float = DEFAULT_SIGMA2_U_HYPER
    hyper_d: float = DEFAULT_SIGMA2_U_HYPER
    beta_prior_precision: np.ndarray | None = None
    area_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "sizes", _ro(self.sizes, np.int64))
        object.__setattr__(self, "y", _ro(self.y))
        n, p = X.shape
        if self.sizes.ndim != 1 or np.any(self.sizes < 1):
            raise InvalidInputError("every area needs at least one unit")
        if int(self.sizes.sum()) != n or len(self.y) != n:
            raise InvalidInputError("X, y and sizes disagree on the number of units")
        if not np.all(np.isin(self.y, (0.0, 1.0))):
            raise InvalidInputError("responses must be binary")
        if not np.all(np.isfinite(X)):
            raise InvalidInputError("design matrix has non-finite entries")
        if np.linalg.matrix_rank(X) < p:
            raise InvalidInputError("design matrix X must have full column rank")
        for name in ("hyper_a", "hyper_b", "hyper_c", "hyper_d"):
            value = float(getattr(self, name))
            if not value > 0:
                raise InvalidInputError(f"{name} must be positive")
            object.__setattr__(self, name, value)
        P0 = np.zeros((p, p)) if self.beta_prior_precision is None else np.array(self.beta_prior_precision, dtype=float)
        if P0.shape != (p, p):
            raise InvalidInputError(f"beta_prior_precision must be {p}x{p}")
        P0.setflags(write=False)
        object.__setattr__(self, "beta_prior_precision", P0)
        if self.area_ids is not None:
            object.__setattr__(self, "area_ids", tuple(str(a) for a in self.area_ids))

    @classmethod
    def from_dataset(cls, data: SurveyDataset, add_intercept: bool = True, **hyper) -> "HBModelSpec":
        X = data.covariates
        if add_intercept:
            X = np.column_stack([np.ones(data.n_units), X])
        return cls(X=X, sizes=data.sizes, y=data.response, area_ids=data.area_ids, **hyper)

    @property
    def n_units(self) -> int:
        return self.X.shape[0]

    @property
    def n_areas(self) -> int:
        return len(self.sizes)

    @property
    def n_coef(self) -> int:
        return self.X.shape[1]

    @property
    def area(self) -> np.ndarray:
        return area_index(self.sizes)

    @property
    def hyper(self) -> np.ndarray:
        return np.array([self.hyper_a, self.hyper_b, self.hyper_c, self.hyper_d])

    def with_y(self, y) -> "HBModelSpec":
        return HBModelSpec(
            self.X, self.sizes, y, self.hyper_a, self.hyper_b, self.hyper_c, self.hyper_d,
            self.beta_prior_precision, self.area_ids,
        )


@dataclass(frozen=True, eq=False)
class GibbsState:
    beta: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    sigma2_e: float
    sigma2_u: float

    def __post_init__(self):
        for name in ("beta", "u", "theta"):
            object.__setattr__(self, name, _ro(getattr(self, name)))
        object.__setattr__(self, "sigma2_e", float(self.sigma2_e))
        object.__setattr__(self, "sigma2_u", float(self.sigma2_u))
        if not (self.sigma2_e > 0 and self.sigma2_u > 0):
            raise InvalidInputError("variance components must be positive")
        if not all(np.all(np.isfinite(getattr(self, n))) for n in ("beta", "u", "theta")):
            raise InvalidInputError("state has non-finite entries")


@dataclass(frozen=True)
class McmcConfig:
    iterations: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    chains: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise InvalidInputError("burn_in must be in [0, iterations)")
        if not 1 <= self.thin <= self.iterations - self.burn_in:
            raise InvalidInputError("thin must be in [1, iterations - burn_in]")
        if self.chains < 1:
            raise InvalidInputError("chains must be positive")

    @property
    def n_retained(self) -> int:
        return (self.iterations - self.burn_in) // self.thin

    def chain_rngs(self) -> list[np.random.Generator]:
        """One independent generator per chain, spawned from ``seed``."""
        return [np.random.default_rng(s) for s in np.random.SeedSequence(self.seed).spawn(self.chains)]


#: Setting used for the published analysis: 200,000 sweeps, 2,000 burn-in, thin 200.
PUBLISHED_CONFIG = McmcConfig(iterations=200_000, burn_in=2_000, thin=200)


@dataclass(eq=False)
class ChainDraws:
    """Retained draws of one chain, stacked along the first axis."""

    beta: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    sigma2_e: np.ndarray
    sigma2_u: np.ndarray
    iteration: np.ndarray
    chain: int = 0
    proposals: int = 0
    sweeps: int = 0
    y: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.iteration)

    def __getitem__(self, k: int) -> GibbsState:
        return GibbsState(self.beta[k], self.u[k], self.theta[k], self.sigma2_e[k], self.sigma2_u[k])

    def __iter__(self) -> Iterator[GibbsState]:
        return (self[k] for k in range(len(self)))

    @property
    def acceptance_rate(self) -> float:
        """Accepted over proposed theta draws in the rejection step."""
        if self.proposals == 0:
            return float("nan")
        return self.sweeps * self.theta.shape[1] / self.proposals

    def parameter_names(self) -> list[str]:
        names = [f"beta[{j}]" for j in range(self.beta.shape[1])]
        names += [f"u[{i}]" for i in range(self.u.shape[1])]
        names += ["sigma2_e", "sigma2_u"]
        names += [f"theta[{k}]" for k in range(self.theta.shape[1])]
        return names

    def series(self, name: str) -> np.ndarray:
        """Trace of one named scalar parameter, e.g. ``beta[0]`` or ``sigma2_u``."""
        if name in ("sigma2_e", "sigma2_u"):
            return getattr(self, name)
        base, _, rest = name.partition("[")
        if base not in ("beta", "u", "theta") or not rest.endswith("]"):
            raise KeyError(name)
        return getattr(self, base)[:, int(rest[:-1])]


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------


def _raise_on_status(status: int, iteration: int) -> None:
    if status == kernels.NONFINITE:
        raise SamplerDivergenceError(f"non-finite draw at sweep {iteration}", iteration)
    if status == kernels.REJECTION_STALLED:
        raise SamplerDivergenceError(
            f"theta rejection sampler exceeded {MAX_REJECTION_ROUNDS} rounds at sweep {iteration}", iteration
        )


def sample_theta_rejection(y, mu, sigma2_e: float, rng: np.random.Generator, size: int | None = None, backend: str | None = None):
    """Draw from the density proportional to ``exp[y t - log(1 + e^t) - (t - mu)^2 / (2 sigma2_e)]``.

    ``y`` and ``mu`` may be scalars or arrays of equal length. With
    ``size`` set, that many independent draws are returned for a scalar
    ``(y, mu)``. Returns a float for scalar input without ``size``.
    """
    if not sigma2_e > 0:
        raise InvalidInputError("sigma2_e must be positive")
    scalar = np.ndim(y) == 0 and np.ndim(mu) == 0 and size is None
    n = 1 if scalar else (size if size is not None else len(np.atleast_1d(mu)))
    yy = np.broadcast_to(np.asarray(y, dtype=float), (n,)).copy()
    mm = np.broadcast_to(np.asarray(mu, dtype=float), (n,)).copy()
    out = np.empty(n)
    k = kernels.get_kernels(backend)
    status, _ = k.sample_theta_block(rng, yy, mm, float(np.sqrt(sigma2_e)), out, MAX_REJECTION_ROUNDS)
    _raise_on_status(status, 0)
    return float(out[0]) if scalar else out


def initial_state(spec: HBModelSpec, rng: np.random.Generator | None = None) -> GibbsState:
    """Starting point from empirical logits of ``(y + 0.5) / 2``.

    ``beta`` is the least-squares fit of those logits, ``u`` is zero and the
    variance components are moment estimates of the residual spread. With an
    ``rng`` the start is over-dispersed around that point (for extra chains).
    """
    theta0 = logit((spec.y + 0.5) / 2.0)
    beta0, *_ = np.linalg.lstsq(spec.X, theta0, rcond=None)
    resid = theta0 - spec.X @ beta0
    s2e = max(float(np.mean(resid**2)), 0.05)
    area_means = np.bincount(spec.area, weights=resid, minlength=spec.n_areas) / spec.sizes
    s2u = max(float(np.var(area_means)), 0.05)
    u0 = np.zeros(spec.n_areas)
    if rng is not None:
        beta0 = beta0 + rng.standard_normal(spec.n_coef)
        u0 = u0 + np.sqrt(s2u) * rng.standard_normal(spec.n_areas)
        s2e *= float(np.exp(rng.standard_normal()))
        s2u *= float(np.exp(rng.standard_normal()))
    return GibbsState(beta0, u0, theta0, s2e, s2u)


def _run(spec, state, rng, n_iter, burn_in, thin, backend, regenerate_y=False, y=None):
    k = kernels.get_kernels(backend)
    n_keep = (n_iter - burn_in) // thin
    beta = np.array(state.beta, dtype=float)
    u = np.array(state.u, dtype=float)
    theta = np.array(state.theta, dtype=float)
    scal = np.array([state.sigma2_e, state.sigma2_u])
    yy = np.array(spec.y if y is None else y, dtype=float)
    out_beta = np.empty((n_keep, spec.n_coef))
    out_u = np.empty((n_keep, spec.n_areas))
    out_theta = np.empty((n_keep, spec.n_units))
    out_scal = np.empty((n_keep, 2))
    out_iter = np.empty(n_keep, dtype=np.int64)
    out_y = np.empty((n_keep if regenerate_y else 0, spec.n_units))
    status, fail_it, proposals = k.run_gibbs(
        rng, np.ascontiguousarray(spec.X), spec.area.astype(np.int64), spec.sizes.astype(np.float64), yy,
        spec.hyper, np.ascontiguousarray(spec.beta_prior_precision), beta, u, theta, scal,
        int(n_iter), int(burn_in), int(thin), bool(regenerate_y), MAX_REJECTION_ROUNDS,
        out_beta, out_u, out_theta, out_scal, out_iter, out_y,
    )
    _raise_on_status(status, fail_it)
    draws = ChainDraws(
        out_beta, out_u, out_theta, out_scal[:, 0].copy(), out_scal[:, 1].copy(), out_iter,
        proposals=int(proposals), sweeps=int(n_iter), y=out_y if regenerate_y else None,
    )
    return draws, GibbsState(beta, u, theta, scal[0], scal[1]), yy


def gibbs_step(state: GibbsState, spec: HBModelSpec, rng: np.random.Generator, backend: str | None = None) -> GibbsState:
    """One full sweep: beta, u, sigma2_e, sigma2_u, then every theta_ij."""
    _, new_state, _ = _run(spec, state, rng, 1, 0, 1, backend)
    return new_state


def run_chain(
    spec: HBModelSpec,
    config: McmcConfig,
    chain: int = 0,
    init: GibbsState | None = None,
    backend: str | None = None,
) -> ChainDraws:
    """Run one chain; deterministic given ``config.seed`` and ``chain``."""
    if not 0 <= chain < config.chains:
        raise InvalidInputError(f"chain index {chain} outside [0, {config.chains})")
    rng = config.chain_rngs()[chain]
    if init is None:
        init = initial_state(spec, rng if chain > 0 else None)
    draws, _, _ = _run(spec, init, rng, config.iterations, config.burn_in, config.thin, backend)
    draws.chain = chain
    return draws


def run_chains(spec: HBModelSpec, config: McmcConfig, backend: str | None = None) -> list[ChainDraws]:
    """Run ``config.chains`` chains with independent spawned seeds, sequentially."""
    return [run_chain(spec, config, c, backend=backend) for c in range(config.chains)]


def successive_conditional_draws(
    spec: HBModelSpec, state: GibbsState, y, rng: np.random.Generator, config: McmcConfig, backend: str | None = None
) -> ChainDraws:
    """Alternate a Gibbs sweep with a fresh ``y ~ Bernoulli(expit(theta))``.

    Under a proper prior the retained ``(parameters, y)`` pairs are draws from
    the joint distribution, which is the successive-conditional simulator used
    to validate the sampler against independent prior-predictive draws.
    """
    draws, _, _ = _run(spec, state, rng, config.iterations, config.burn_in, config.thin, backend, True, y)
    return draws


# --------------------------------------------------------------------------
# posterior summaries
# --------------------------------------------------------------------------


def _stack_draws(draws: "ChainDraws | Sequence[ChainDraws]") -> np.ndarray:
    if isinstance(draws, ChainDraws):
        return draws.theta
    chains = list(draws)
    if chains and isinstance(chains[0], GibbsState):
        return np.array([s.theta for s in chains])
    return np.concatenate([c.theta for c in chains], axis=0)


def summarize_posterior(
    draws: "ChainDraws | Sequence[ChainDraws] | Sequence[GibbsState]",
    constraint: ConstraintWeights,
    scale: str = "probability",
) -> PosteriorSummary:
    """Monte Carlo posterior moments of the unit parameters.

    ``scale="probability"`` summarises ``expit(theta_ij)``, the unit
    proportions that benchmarking targets; ``"logit"`` summarises the raw
    draws. Moments use the divide-by-M convention. The variance of each
    weighted area mean is the full double sum ``w_i' Cov_i w_i``.
    """
    theta = _stack_draws(draws)
    if theta.shape[0] < 2:
        raise InsufficientSampleError(f"need at least 2 retained draws, got {theta.shape[0]}")
    if scale == "probability":
        values = expit(theta)
    elif scale == "logit":
        values = theta
    else:
        raise InvalidInputError(f"unknown scale {scale!r}")
    if values.shape[1] != len(constraint.unit_weights):
        raise InvalidInputError("draws and constraint disagree on the number of units")

    n_draws = values.shape[0]
    mean = values.mean(axis=0)
    centered = values - mean
    offsets = area_offsets(constraint.sizes)
    w = constraint.unit_weights
    covs, area_mean, area_var = [], [], []
    for i in range(constraint.n_areas):
        lo, hi = offsets[i], offsets[i + 1]
        block = centered[:, lo:hi]
        cov = block.T @ block / n_draws
        cov = 0.5 * (cov + cov.T)
        wi = w[lo:hi]
        covs.append(cov)
        area_mean.append(float(wi @ mean[lo:hi]))
        area_var.append(float(wi @ cov @ wi))
    var = np.concatenate([np.diag(c) for c in covs])
    return PosteriorSummary(mean, var, tuple(covs), np.array(area_mean), np.array(area_var), n_draws, constraint.sizes)
