"""Brute-force solver for equality-constrained quadratic programs.

Serves as ground truth for the closed-form benchmarking estimators: each
benchmarking problem is encoded as ``min (x - c)^T Q (x - c)`` subject to
``C x = r`` and solved through the dense saddle-point (KKT) system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .bench_multi import MultiBenchmarkProblem
from .core import (
    BenchmarkProblem,
    ConstraintWeights,
    LossWeights,
    PosteriorSummary,
    Scheme,
    area_offsets,
    area_sums,
    make_loss_weights,
)
from .errors import DegenerateProblemError


@dataclass(frozen=True, eq=False)
class QuadraticProgram:
    Q: np.ndarray
    center: np.ndarray
    C: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        c = np.asarray(self.center, dtype=float).reshape(-1)
        C = np.asarray(self.C, dtype=float).reshape(-1, len(c))
        r = np.asarray(self.r, dtype=float).reshape(-1)
        if Q.shape != (len(c), len(c)):
            raise ValueError("Q must be square and match the center")
        if C.shape[0] != len(r):
            raise ValueError("C and r disagree on the number of constraints")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "r", r)

    def objective(self, x) -> float:
        d = np.asarray(x, dtype=float) - self.center
        return float(d @ self.Q @ d)

    def residual(self, x) -> float:
        if len(self.r) == 0:
            return 0.0
        return float(np.max(np.abs(self.C @ x - self.r)))


def solve_kkt(qp: QuadraticProgram) -> np.ndarray:
    """Solve ``[Q C^T; C 0] [x; lam] = [Q c; r]`` densely."""
    n, k = len(qp.center), len(qp.r)
    if k == 0:
        return qp.center.copy()
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = qp.Q
    kkt[:n, n:] = qp.C.T
    kkt[n:, :n] = qp.C
    rhs = np.concatenate([qp.Q @ qp.center, qp.r])
    try:
        lu, piv = scipy.linalg.lu_factor(kkt, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise DegenerateProblemError(f"KKT system could not be factorised: {exc}") from exc
    if np.any(np.diag(lu) == 0.0):
        raise DegenerateProblemError("KKT matrix is singular")
    return scipy.linalg.lu_solve((lu, piv), rhs)[:n]


def solve_projected_cg(qp: QuadraticProgram, tol: float = 1e-13, max_iter: int | None = None) -> np.ndarray:
    """Iterative cross-check: conjugate gradients on the constraint null space.

    Starts from the minimum-norm feasible point and only moves along
    directions projected onto ``{d : C d = 0}``.
    """
    n = len(qp.center)
    if len(qp.r) == 0:
        return qp.center.copy()
    C = qp.C
    gram = scipy.linalg.cho_factor(C @ C.T)

    def project(v):
        return v - C.T @ scipy.linalg.cho_solve(gram, C @ v)

    x = qp.center + C.T @ scipy.linalg.cho_solve(gram, qp.r - C @ qp.center)
    g = qp.Q @ (x - qp.center)
    r = -project(g)
    d = r.copy()
    rr = r @ r
    r0 = np.sqrt(rr) if rr > 0 else 1.0
    for _ in range(max_iter or 4 * n):
        if np.sqrt(rr) <= tol * r0:
            break
        Qd = qp.Q @ d
        alpha = rr / (d @ Qd)
        x = x + alpha * d
        r = project(r - alpha * Qd)
        rr_new = r @ r
        d = r + (rr_new / rr) * d
        rr = rr_new
    return x


# --------------------------------------------------------------------------
# encodings
# --------------------------------------------------------------------------


def encode_theorem1(problem: BenchmarkProblem) -> QuadraticProgram:
    """Encode scalar two-stage mean benchmarking as a QP over the unit estimates.

    Block ``i`` of ``Q`` is ``diag(xi_i) + phi_i w_i w_i^T``; the single
    constraint row is ``eta_i w_i^T`` stacked over areas with right-hand side ``p``.
    """
    cw, loss = problem.constraint, problem.loss
    offsets = area_offsets(cw.sizes)
    blocks = []
    for i in range(cw.n_areas):
        lo, hi = offsets[i], offsets[i + 1]
        wi = cw.unit_weights[lo:hi]
        blocks.append(np.diag(loss.unit_loss[lo:hi]) + loss.area_loss[i] * np.outer(wi, wi))
    Q = scipy.linalg.block_diag(*blocks)
    row = np.repeat(cw.area_weights, cw.sizes) * cw.unit_weights
    return QuadraticProgram(Q, problem.bayes_estimates, row[None, :], [cw.target])


def encode_theorem3(problem: MultiBenchmarkProblem) -> QuadraticProgram:
    """Encode the multivariate problem over the stacked unit vectors.

    Block ``i`` of ``Q`` is ``A_i + W_i^T Psi_i W_i`` with ``A_i`` the block
    diagonal of the unit ``Lambda`` matrices and ``W_i = (W_i1, ..., W_in_i)``;
    the constraint is ``sum_i Gamma_i W_i theta_i = p``.
    """
    offsets = area_offsets(problem.sizes)
    dim = problem.dim
    blocks, cols = [], []
    for i in range(problem.n_areas):
        lo, hi = offsets[i], offsets[i + 1]
        A = scipy.linalg.block_diag(*problem.Lambda[lo:hi])
        Wi = np.concatenate(list(problem.W[lo:hi]), axis=1)  # dim x (n_i dim)
        blocks.append(A + Wi.T @ problem.Psi[i] @ Wi)
        cols.append(problem.Gamma[i] @ Wi)
    Q = scipy.linalg.block_diag(*blocks)
    C = np.concatenate(cols, axis=1)
    center = problem.bayes_estimates.reshape(-1)
    assert C.shape == (dim, len(center))
    return QuadraticProgram(Q, center, C, problem.target)


def null_space_perturbation(qp: QuadraticProgram, x: np.ndarray, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    """Random feasible point ``x + N z`` with ``N`` spanning the constraint null space."""
    if len(qp.r) == 0:
        return x + scale * rng.standard_normal(len(x))
    N = scipy.linalg.null_space(qp.C)
    return x + scale * N @ rng.standard_normal(N.shape[1])


# --------------------------------------------------------------------------
# random instances
# --------------------------------------------------------------------------


def random_sizes(rng: np.random.Generator, max_areas: int = 5, max_units: int = 6, min_areas: int = 1) -> np.ndarray:
    m = int(rng.integers(min_areas, max_areas + 1))
    return rng.integers(1, max_units + 1, size=m)


def random_constraint(rng: np.random.Generator, sizes: np.ndarray) -> ConstraintWeights:
    raw = rng.uniform(0.2, 3.0, size=int(sizes.sum()))
    totals = area_sums(raw, sizes)
    unit_w = raw / np.repeat(totals, sizes)
    eta = rng.uniform(0.2, 3.0, size=len(sizes))
    return ConstraintWeights(unit_w, eta / eta.sum(), float(rng.uniform(0.05, 0.6)), sizes)


def random_posterior(rng: np.random.Generator, constraint: ConstraintWeights) -> PosteriorSummary:
    """Posterior moments of proportion-like parameters with random SPD covariances."""
    sizes = constraint.sizes
    offsets = area_offsets(sizes)
    mean = rng.uniform(0.03, 0.6, size=int(sizes.sum()))
    covs = []
    for i, n in enumerate(sizes):
        B = rng.standard_normal((n, n + 2)) * rng.uniform(0.01, 0.08)
        covs.append(B @ B.T / (n + 2) + np.diag(rng.uniform(1e-4, 4e-3, size=n)))
    w = constraint.unit_weights
    var = np.concatenate([np.diag(c) for c in covs])
    area_mean = area_sums(w * mean, sizes)
    area_var = np.array([w[offsets[i] : offsets[i + 1]] @ c @ w[offsets[i] : offsets[i + 1]] for i, c in enumerate(covs)])
    return PosteriorSummary(mean, var, tuple(covs), area_mean, area_var, 1000, sizes)


def random_problem(
    rng: np.random.Generator,
    scheme: "str | Scheme | None" = None,
    max_areas: int = 5,
    max_units: int = 6,
) -> BenchmarkProblem:
    """Random well-posed scalar problem; ``scheme=None`` draws random positive loss weights."""
    sizes = random_sizes(rng, max_areas, max_units)
    cw = random_constraint(rng, sizes)
    post = random_posterior(rng, cw)
    problem = BenchmarkProblem.from_posterior(post, cw)
    if scheme is None:
        loss = LossWeights(
            rng.uniform(0.1, 10.0, size=int(sizes.sum())), rng.uniform(0.0, 10.0, size=len(sizes)), "random"
        )
    else:
        loss = make_loss_weights(scheme, problem)
    return problem.with_loss(loss)


def _random_spd(rng: np.random.Generator, dim: int, count: int) -> np.ndarray:
    B = rng.standard_normal((count, dim, dim))
    return B @ B.transpose(0, 2, 1) + dim * 0.5 * np.eye(dim)


def random_multi_problem(
    rng: np.random.Generator, dim: int, max_areas: int = 5, max_units: int = 6
) -> MultiBenchmarkProblem:
    sizes = random_sizes(rng, max_areas, max_units)
    n, m = int(sizes.sum()), len(sizes)
    # Well-conditioned, possibly non-symmetric weight matrices.
    W = rng.uniform(0.1, 1.0, size=(n, 1, 1)) * np.eye(dim) + 0.2 * rng.standard_normal((n, dim, dim))
    Gamma = rng.uniform(0.1, 1.0, size=(m, 1, 1)) * np.eye(dim) + 0.2 * rng.standard_normal((m, dim, dim))
    return MultiBenchmarkProblem(
        bayes_estimates=rng.uniform(0.0, 1.0, size=(n, dim)),
        W=W,
        Gamma=Gamma,
        Lambda=_random_spd(rng, dim, n),
        Psi=_random_spd(rng, dim, m),
        target=rng.uniform(0.0, 2.0, size=dim),
        sizes=sizes,
    )
