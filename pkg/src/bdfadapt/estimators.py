"""Local temporal error estimates from the BDF2 / BDF3 difference.

Both estimators compare the accepted-candidate BDF2 solution with a BDF3
solution on the same history, component by component in L2:

* ``implicit``: the BDF3 step is solved to convergence with Newton.
* ``linear-implicit``: the BDF3 solution is replaced by one Newton
  correction started from the BDF2 solution, which costs one assembly,
  one factorization and one back-solve.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import nonlinear
from .bdf import HistoryBuffer, apply_xi
from .nonlinear import LinearSolverError, NewtonConfig
from .problem import DAEProblem

IMPLICIT = "implicit"
LINEAR_IMPLICIT = "linear-implicit"


@dataclass
class EstimateReport:
    total: float
    per_component: dict[str, float]
    kind: str
    cost: float = 0.0
    failed: bool = False
    newton_iterations: int = 0
    bdf3_state: np.ndarray | None = field(default=None, repr=False)


def component_l2_diff(problem: DAEProblem, a: np.ndarray, b: np.ndarray,
                      relative: bool = False) -> dict[str, float]:
    """Per-component L2 norm of ``a - b``.

    With ``relative=True`` each value is divided by the norm of the same
    component of ``a`` (left as the absolute value when that norm is zero).
    """
    part = problem.partition()
    part.check(a)
    part.check(b)
    out = {}
    for name, start, stop in part.components:
        d = problem.l2_norm(name, a[start:stop] - b[start:stop])
        if relative:
            ref = problem.l2_norm(name, a[start:stop])
            d = d / ref if ref > 0 else d
        out[name] = d
    return out


def _failed(problem, kind, cost, iterations=0) -> EstimateReport:
    names = problem.partition().names
    return EstimateReport(np.inf, {n: np.inf for n in names}, kind, cost, True, iterations)


def linear_implicit_correction(problem: DAEProblem, history: HistoryBuffer, t_new: float,
                               u_bdf2: np.ndarray) -> np.ndarray:
    """``U_bdf2 + dU`` where ``J dU = -R`` for the BDF3 residual at ``U_bdf2``.

    J uses the BDF3 shift. Dirichlet entries of ``dU`` are zeroed.
    """
    stencil = history.stencil(t_new, 3)
    udot = apply_xi(stencil, u_bdf2, history)
    r = problem.residual(t_new, udot, u_bdf2)
    J = problem.jacobian(t_new, udot, u_bdf2, stencil.shift)
    delta = nonlinear.back_solve(nonlinear.factorize(J), -r)
    delta[problem.constrained_dofs()] = 0.0
    return u_bdf2 + delta


def estimate_linear_implicit(problem: DAEProblem, history: HistoryBuffer, t_new: float,
                             u_bdf2: np.ndarray, relative: bool = False) -> EstimateReport:
    start = time.perf_counter()
    try:
        u3 = linear_implicit_correction(problem, history, t_new, u_bdf2)
    except LinearSolverError:
        return _failed(problem, LINEAR_IMPLICIT, time.perf_counter() - start)
    per = component_l2_diff(problem, u_bdf2, u3, relative)
    cost = time.perf_counter() - start
    if not all(np.isfinite(v) for v in per.values()):
        return _failed(problem, LINEAR_IMPLICIT, cost)
    return EstimateReport(max(per.values()), per, LINEAR_IMPLICIT, cost, bdf3_state=u3)


def estimate_implicit(problem: DAEProblem, history: HistoryBuffer, t_new: float,
                      u_bdf2: np.ndarray, newton: NewtonConfig | None = None,
                      relative: bool = False) -> EstimateReport:
    """Solve the full BDF3 step from ``U_bdf2`` and compare.

    At least one Newton update is always taken, so a BDF2 guess that
    already meets the residual tolerance is still corrected.
    """
    newton = newton or NewtonConfig()
    newton = replace(newton, min_iter=max(1, newton.min_iter))
    start = time.perf_counter()
    stencil = history.stencil(t_new, 3)
    try:
        res = nonlinear.solve_implicit_step(problem, stencil, history, t_new, guess=u_bdf2, cfg=newton)
    except LinearSolverError:
        return _failed(problem, IMPLICIT, time.perf_counter() - start)
    if not res.converged:
        return _failed(problem, IMPLICIT, time.perf_counter() - start, res.iterations)
    per = component_l2_diff(problem, u_bdf2, res.state, relative)
    cost = time.perf_counter() - start
    return EstimateReport(max(per.values()), per, IMPLICIT, cost,
                          newton_iterations=res.iterations, bdf3_state=res.state)


def estimate(kind: str, problem, history, t_new, u_bdf2, newton=None, relative=False) -> EstimateReport:
    if kind in (IMPLICIT, "impl"):
        return estimate_implicit(problem, history, t_new, u_bdf2, newton, relative)
    if kind in (LINEAR_IMPLICIT, "li"):
        return estimate_linear_implicit(problem, history, t_new, u_bdf2, relative)
    raise ValueError(f"unknown estimator kind {kind!r}")
