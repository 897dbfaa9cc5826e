"""Newton iteration for one implicit BDF step and the sparse direct solves under it."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bdf import BdfStencil, HistoryBuffer, apply_xi
from .problem import DAEProblem

log = logging.getLogger(__name__)


class LinearSolverError(RuntimeError):
    def __init__(self, message: str, pivot: int | None = None):
        super().__init__(message)
        self.pivot = pivot


@dataclass(frozen=True)
class NewtonConfig:
    """Stopping rules for the Newton loop.

    ``abs_tol=None`` means ``1e-10 * sqrt(N)`` for a system of size N.
    ``min_iter`` forces at least that many updates even when the initial
    guess already satisfies the tolerance.
    """

    abs_tol: float | None = None
    rel_tol: float = 1e-8
    max_iter: int = 20
    damping: float = 1.0
    min_iter: int = 0

    def __post_init__(self):
        if self.abs_tol is not None and not self.abs_tol > 0:
            raise ValueError("abs_tol must be positive")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if not 0 <= self.min_iter <= self.max_iter:
            raise ValueError("min_iter must lie in [0, max_iter]")

    def absolute_tolerance(self, n: int) -> float:
        return self.abs_tol if self.abs_tol is not None else 1e-10 * np.sqrt(n)


class SparseFactorization:
    """LU factors of a square sparse matrix (SuperLU, partial pivoting)."""

    def __init__(self, lu, shape):
        self._lu = lu
        self.shape = shape

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        x = self._lu.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise LinearSolverError("back substitution produced non-finite values")
        return x


def _dense_zero_pivot(A: sp.spmatrix) -> int | None:
    if A.shape[0] > 3000:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, _ = sla.lu_factor(A.toarray(), check_finite=False)
    d = np.abs(np.diag(lu))
    tol = A.shape[0] * np.finfo(float).eps * max(d.max(initial=0.0), 1.0)
    small = np.flatnonzero(d <= tol)
    return int(small[0]) if small.size else None


def factorize(J) -> SparseFactorization:
    A = sp.csc_matrix(J, dtype=float)
    n, m = A.shape
    if n != m:
        raise LinearSolverError(f"matrix must be square, got {A.shape}")
    A.eliminate_zeros()
    empty_cols = np.flatnonzero(np.diff(A.indptr) == 0)
    if empty_cols.size:
        raise LinearSolverError(f"structurally singular: column {empty_cols[0]} is empty",
                                pivot=int(empty_cols[0]))
    empty_rows = np.setdiff1d(np.arange(n), A.indices)
    if empty_rows.size:
        raise LinearSolverError(f"structurally singular: row {empty_rows[0]} is empty",
                                pivot=int(empty_rows[0]))
    try:
        lu = spla.splu(A)
    except RuntimeError as exc:
        pivot = _dense_zero_pivot(A)
        where = f" at pivot {pivot}" if pivot is not None else ""
        raise LinearSolverError(f"numerically singular matrix{where}: {exc}", pivot=pivot) from exc
    return SparseFactorization(lu, A.shape)


def back_solve(factors: SparseFactorization, rhs: np.ndarray) -> np.ndarray:
    return factors.solve(rhs)


class NewtonResult(NamedTuple):
    state: np.ndarray
    iterations: int
    converged: bool
    residual_norms: list[float]


def solve_implicit_step(problem: DAEProblem, stencil: BdfStencil, history: HistoryBuffer,
                        t_new: float, guess: np.ndarray | None = None,
                        cfg: NewtonConfig | None = None) -> NewtonResult:
    """Solve ``R(t_new, Xi(U), U) = 0`` for the new state U.

    Each iteration solves ``J delta = -R`` with ``J = xi_0 dR/dUdot + dR/dU``
    reassembled at the current iterate. The initial guess defaults to the
    last accepted state. Non-convergence is reported, not raised; a
    singular Jacobian raises :class:`LinearSolverError`.
    """
    cfg = cfg or NewtonConfig()
    if guess is None:
        guess = history.latest[1]
    u = problem.apply_constraints(t_new, guess)
    abs_tol = cfg.absolute_tolerance(u.size)
    shift = stencil.shift

    udot = apply_xi(stencil, u, history)
    r = problem.residual(t_new, udot, u)
    norms = [float(np.max(np.abs(r), initial=0.0))]
    if not np.isfinite(norms[0]):
        return NewtonResult(u, 0, False, norms)

    it = 0
    while True:
        rn = norms[-1]
        if it >= cfg.min_iter and (rn <= abs_tol or rn <= cfg.rel_tol * norms[0]):
            return NewtonResult(u, it, True, norms)
        if it >= cfg.max_iter:
            return NewtonResult(u, it, False, norms)

        J = problem.jacobian(t_new, udot, u, shift)
        delta = back_solve(factorize(J), -r)
        lam = cfg.damping
        while True:
            trial = u + lam * delta
            trial_dot = apply_xi(stencil, trial, history)
            r_trial = problem.residual(t_new, trial_dot, trial)
            rn_trial = float(np.max(np.abs(r_trial), initial=0.0))
            if np.isfinite(rn_trial) and np.all(np.isfinite(trial)):
                break
            lam *= 0.5
            if lam < 2.0**-4:
                log.debug("Newton step overflowed even with damping 1/16 at t=%g", t_new)
                return NewtonResult(u, it, False, norms)
        u, udot, r = trial, trial_dot, r_trial
        norms.append(rn_trial)
        it += 1
