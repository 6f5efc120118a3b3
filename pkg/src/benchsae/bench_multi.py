"""Multivariate two-stage mean benchmarking with matrix-valued weights."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import BenchmarkProblem, area_index, area_offsets
from .errors import DegenerateProblemError, InvalidInputError

#: Reciprocal condition number below which a matrix is treated as singular.
RCOND_MIN = 1e-12
SYMMETRY_RTOL = 1e-10


def _stack(values, n: int, dim: int, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.shape != (n, dim, dim):
        raise InvalidInputError(f"{name} must have shape {(n, dim, dim)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    arr.setflags(write=False)
    return arr


def _check_spd(mats: np.ndarray, name: str, owner: str) -> None:
    asym = np.abs(mats - mats.transpose(0, 2, 1))
    scale = np.maximum(np.abs(mats).max(axis=(1, 2)), 1.0)
    for k in np.flatnonzero(asym.max(axis=(1, 2)) > SYMMETRY_RTOL * scale):
        raise InvalidInputError(f"{name} for {owner} {k} is not symmetric")
    try:
        np.linalg.cholesky(mats)
    except np.linalg.LinAlgError:
        for k, mat in enumerate(mats):
            try:
                np.linalg.cholesky(mat)
            except np.linalg.LinAlgError:
                raise InvalidInputError(f"{name} for {owner} {k} is not positive definite") from None


def _rcond(mats: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(mats)
    return np.where(np.isfinite(cond), 1.0 / cond, 0.0)


@dataclass(frozen=True, eq=False)
class MultiBenchmarkProblem:
    """Vector-valued benchmarking problem.

    Arrays are stacked in area order: ``bayes_estimates`` is ``(N, dim)``,
    ``W`` and ``Lambda`` are ``(N, dim, dim)`` and ``Gamma`` and ``Psi`` are
    ``(m, dim, dim)``.
    """

    bayes_estimates: np.ndarray
    W: np.ndarray
    Gamma: np.ndarray
    Lambda: np.ndarray
    Psi: np.ndarray
    target: np.ndarray
    sizes: np.ndarray

    def __post_init__(self):
        sizes = np.array(self.sizes, dtype=np.int64)
        if sizes.ndim != 1 or np.any(sizes < 1):
            raise InvalidInputError("sizes must list at least one unit per area")
        sizes.setflags(write=False)
        object.__setattr__(self, "sizes", sizes)
        n, m = int(sizes.sum()), len(sizes)
        theta = np.array(self.bayes_estimates, dtype=float)
        if theta.ndim == 1:
            theta = theta[:, None]
        if theta.shape[0] != n:
            raise InvalidInputError(f"bayes_estimates must have {n} rows")
        dim = theta.shape[1]
        theta.setflags(write=False)
        object.__setattr__(self, "bayes_estimates", theta)
        object.__setattr__(self, "W", _stack(self.W, n, dim, "W"))
        object.__setattr__(self, "Lambda", _stack(self.Lambda, n, dim, "Lambda"))
        object.__setattr__(self, "Gamma", _stack(self.Gamma, m, dim, "Gamma"))
        object.__setattr__(self, "Psi", _stack(self.Psi, m, dim, "Psi"))
        target = np.array(self.target, dtype=float).reshape(-1)
        if target.shape != (dim,):
            raise InvalidInputError(f"target must have length {dim}")
        target.setflags(write=False)
        object.__setattr__(self, "target", target)
        _check_spd(self.Lambda, "Lambda", "unit")
        _check_spd(self.Psi, "Psi", "area")

    @property
    def dim(self) -> int:
        return self.bayes_estimates.shape[1]

    @property
    def n_areas(self) -> int:
        return len(self.sizes)

    @classmethod
    def from_scalar(cls, problem: BenchmarkProblem) -> "MultiBenchmarkProblem":
        """Embed a scalar problem (requires positive area loss weights)."""
        cw, loss = problem.constraint, problem.loss
        return cls(
            bayes_estimates=problem.bayes_estimates[:, None],
            W=cw.unit_weights[:, None, None],
            Gamma=cw.area_weights[:, None, None],
            Lambda=loss.unit_loss[:, None, None],
            Psi=loss.area_loss[:, None, None],
            target=[cw.target],
            sizes=cw.sizes,
        )

    def area_bayes(self) -> np.ndarray:
        """``sum_j W_ij theta_B_ij`` per area, shape ``(m, dim)``."""
        per_unit = np.einsum("nab,nb->na", self.W, self.bayes_estimates)
        return np.add.reduceat(per_unit, area_offsets(self.sizes)[:-1], axis=0)

    def overall_bayes(self) -> np.ndarray:
        return np.einsum("iab,ib->a", self.Gamma, self.area_bayes())


@dataclass(frozen=True, eq=False)
class MultiBenchmarkSolution:
    unit_estimates: np.ndarray
    area_estimates: np.ndarray
    multiplier: np.ndarray  # R^{-1} (p - theta_w)
    sizes: np.ndarray


def benchmark_mean_multi(problem: MultiBenchmarkProblem) -> MultiBenchmarkSolution:
    """Closed-form minimiser under ``sum_j W_ij theta_ij = delta_i`` and ``sum_i Gamma_i delta_i = p``."""
    sizes = problem.sizes
    dim = problem.dim
    eye = np.eye(dim)

    # Lambda^{-1} W^T per unit, then s_i = sum_j W_ij Lambda_ij^{-1} W_ij^T
    lam_inv_wt = np.linalg.solve(problem.Lambda, problem.W.transpose(0, 2, 1))
    s = np.add.reduceat(problem.W @ lam_inv_wt, area_offsets(sizes)[:-1], axis=0)
    rc = _rcond(s)
    if np.any(rc < RCOND_MIN):
        bad = int(np.flatnonzero(rc < RCOND_MIN)[0])
        raise DegenerateProblemError(f"s matrix of area {bad} is singular (rcond {rc[bad]:.3g})")
    s_inv = np.linalg.solve(s, np.broadcast_to(eye, s.shape))

    middle = problem.Psi + s_inv
    rc = _rcond(middle)
    if np.any(rc < RCOND_MIN):
        bad = int(np.flatnonzero(rc < RCOND_MIN)[0])
        raise DegenerateProblemError(f"Psi + s^-1 of area {bad} is singular")
    gain = np.linalg.solve(middle, problem.Gamma.transpose(0, 2, 1))  # (Psi + s^-1)^-1 Gamma^T
    R = np.einsum("iab,ibc->ac", problem.Gamma, gain)
    if _rcond(R[None])[0] < RCOND_MIN:
        raise DegenerateProblemError("aggregate matrix R is singular")

    area_bayes = problem.area_bayes()
    gap = problem.target - np.einsum("iab,ib->a", problem.Gamma, area_bayes)
    lam = np.linalg.solve(R, gap)

    area_shift = gain @ lam  # (m, dim)
    unit_dir = np.linalg.solve(s, area_shift[..., None])[..., 0]  # s_i^{-1} area_shift_i
    idx = area_index(sizes)
    units = problem.bayes_estimates + np.einsum("nab,nb->na", lam_inv_wt, unit_dir[idx])
    areas = area_bayes + area_shift
    if not (np.all(np.isfinite(units)) and np.all(np.isfinite(areas))):
        raise DegenerateProblemError("benchmarked estimates are not finite")
    return MultiBenchmarkSolution(units, areas, lam, sizes)


def multi_constraint_residuals(solution: MultiBenchmarkSolution, problem: MultiBenchmarkProblem) -> tuple[float, float]:
    per_unit = np.einsum("nab,nb->na", problem.W, solution.unit_estimates)
    area_means = np.add.reduceat(per_unit, area_offsets(problem.sizes)[:-1], axis=0)
    within = float(np.max(np.abs(area_means - solution.area_estimates)))
    overall = float(np.max(np.abs(np.einsum("iab,ib->a", problem.Gamma, solution.area_estimates) - problem.target)))
    return within, overall
