"""Problems with closed-form solutions, and constant-step convergence sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .bdf import HistoryBuffer, compute_coefficients
from .nonlinear import NewtonConfig, solve_implicit_step
from .problem import ComponentPartition, DAEProblem


class ManufacturedProblem(DAEProblem):
    """A DAE that knows its exact solution and its time derivative."""

    description = ""

    def exact(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def exact_dot(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def initial_state(self, t0: float) -> np.ndarray:
        return self.exact(t0)

    def self_check(self, n: int = 100, t_range=(0.0, 2.0), seed: int = 0, tol: float = 1e-12) -> float:
        """Max residual of the exact solution at ``n`` random times; raises above ``tol``."""
        rng = np.random.default_rng(seed)
        worst = 0.0
        for t in rng.uniform(*t_range, size=n):
            u = self.exact(t)
            r = self.residual(t, self.exact_dot(t), u)
            worst = max(worst, float(np.max(np.abs(r))) / max(1.0, float(np.max(np.abs(u)))))
        if worst > tol:
            raise AssertionError(f"{self.description}: exact solution residual {worst:.3e} > {tol:g}")
        return worst


class ScalarODE(ManufacturedProblem):
    """``u' = f(t, u)`` written as ``R = udot - f(t, u)``."""

    def __init__(self, rhs, drhs_du, exact, exact_dot, description=""):
        self._f = rhs
        self._dfdu = drhs_du
        self._exact = exact
        self._exact_dot = exact_dot
        self.description = description

    def partition(self):
        return ComponentPartition((("u", 0, 1),))

    def residual(self, t, udot, u):
        return np.asarray(udot, dtype=float) - self._f(t, np.asarray(u, dtype=float))

    def jacobian(self, t, udot, u, shift):
        return sp.csr_matrix(np.atleast_2d(shift - self._dfdu(t, np.asarray(u, dtype=float))))

    def exact(self, t):
        return np.atleast_1d(np.asarray(self._exact(t), dtype=float))

    def exact_dot(self, t):
        return np.atleast_1d(np.asarray(self._exact_dot(t), dtype=float))


def make_polynomial_ode(degree: int) -> ScalarODE:
    """``u' = d t^(d-1)`` with ``u = t^d``; the residual does not depend on u."""
    d = int(degree)
    if d < 0:
        raise ValueError("degree must be >= 0")
    dcoef = float(d)
    return ScalarODE(
        rhs=lambda t, u: np.full_like(u, dcoef * t ** (d - 1) if d else 0.0),
        drhs_du=lambda t, u: np.zeros_like(u),
        exact=lambda t: t**d,
        exact_dot=lambda t: dcoef * t ** (d - 1) if d else 0.0,
        description=f"polynomial degree {d}",
    )


def make_stiff_nonlinear_ode(lam: float = 1e3) -> ScalarODE:
    """``u' = -lam (u - sin t) - (u^2 - sin^2 t) + cos t``, ``u(0) = 0``.

    The exact solution is ``sin t``; the quadratic term vanishes on it but
    makes the Newton correction differ from the exact implicit solve.
    """
    return ScalarODE(
        rhs=lambda t, u: -lam * (u - np.sin(t)) - (u**2 - np.sin(t) ** 2) + np.cos(t),
        drhs_du=lambda t, u: -lam - 2.0 * u,
        exact=np.sin,
        exact_dot=np.cos,
        description=f"stiff nonlinear ODE, lambda={lam:g}",
    )


class LinearSaddleDAE(ManufacturedProblem):
    """``M u' + K u + B^T p = f(t)``, ``B u = g(t)``.

    Small dense blocks with a manufactured smooth ``(u, p)``. The second
    block carries no time derivative, like the pressure in incompressible flow.
    """

    description = "linear saddle-point DAE"

    def __init__(self, n_u: int = 8, n_p: int = 3, seed: int = 7):
        rng = np.random.default_rng(seed)
        Q = rng.standard_normal((n_u, n_u))
        self.M = Q @ Q.T / n_u + np.eye(n_u)
        S = rng.standard_normal((n_u, n_u))
        W = rng.standard_normal((n_u, n_u))
        self.K = S @ S.T / n_u + np.eye(n_u) + 0.5 * (W - W.T)
        self.B = rng.standard_normal((n_p, n_u))
        if np.linalg.matrix_rank(self.B) < n_p:
            raise ValueError("constraint block is rank deficient")
        self.n_u, self.n_p = n_u, n_p
        self.omega_u = rng.uniform(1.0, 3.0, n_u)
        self.phase_u = rng.uniform(0.0, 2 * np.pi, n_u)
        self.omega_p = rng.uniform(1.0, 3.0, n_p)
        self.phase_p = rng.uniform(0.0, 2 * np.pi, n_p)
        self._jac_const = sp.bmat([[sp.csr_matrix(self.K), sp.csr_matrix(self.B.T)],
                                   [sp.csr_matrix(self.B), None]], format="csr")
        self._mass = sp.bmat([[sp.csr_matrix(self.M), None],
                              [None, sp.csr_matrix((n_p, n_p))]], format="csr")

    def partition(self):
        return ComponentPartition.from_sizes([("velocity", self.n_u), ("pressure", self.n_p)])

    def _u(self, t):
        return np.sin(self.omega_u * t + self.phase_u)

    def _udot(self, t):
        return self.omega_u * np.cos(self.omega_u * t + self.phase_u)

    def _p(self, t):
        return np.cos(self.omega_p * t + self.phase_p)

    def _pdot(self, t):
        return -self.omega_p * np.sin(self.omega_p * t + self.phase_p)

    def forcing(self, t):
        f = self.M @ self._udot(t) + self.K @ self._u(t) + self.B.T @ self._p(t)
        g = self.B @ self._u(t)
        return f, g

    def residual(self, t, udot, u):
        n = self.n_u
        f, g = self.forcing(t)
        r = np.empty(n + self.n_p)
        r[:n] = self.M @ udot[:n] + self.K @ u[:n] + self.B.T @ u[n:] - f
        r[n:] = self.B @ u[:n] - g
        return r

    def jacobian(self, t, udot, u, shift):
        return (shift * self._mass + self._jac_const).tocsr()

    def exact(self, t):
        return np.concatenate([self._u(t), self._p(t)])

    def exact_dot(self, t):
        return np.concatenate([self._udot(t), self._pdot(t)])


def make_linear_saddle_dae(seed: int = 7) -> LinearSaddleDAE:
    return LinearSaddleDAE(seed=seed)


# constant-step sweeps ----------------------------------------------------------------

SCHEMES = ("bdf1", "bdf2", "bdf3", "li-bdf3")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray


def integrate_constant(problem: ManufacturedProblem, scheme: str, h: float, t_end: float,
                       t0: float = 0.0, newton: NewtonConfig | None = None) -> Trajectory:
    """Fixed-step integration seeded with exact starting values.

    ``li-bdf3`` advances with BDF2 and replaces each new state by the
    one-step Newton correction towards the BDF3 solution.
    """
    from .estimators import linear_implicit_correction

    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    k = {"bdf1": 1, "bdf2": 2, "bdf3": 3, "li-bdf3": 3}[scheme]
    n_steps = int(round((t_end - t0) / h))
    if not np.isclose(n_steps * h, t_end - t0, rtol=1e-9):
        raise ValueError("t_end - t0 must be a multiple of h")
    times = t0 + h * np.arange(n_steps + 1)
    states = np.empty((n_steps + 1, problem.size))
    history = HistoryBuffer()
    for i in range(k):
        states[i] = problem.exact(times[i])
        history.push(times[i], states[i])
    step_k = 2 if scheme == "li-bdf3" else k
    for i in range(k, n_steps + 1):
        stencil = compute_coefficients(step_k, [h] * step_k)
        res = solve_implicit_step(problem, stencil, history, times[i], cfg=newton)
        if not res.converged:
            raise RuntimeError(f"{scheme}: Newton failed at t={times[i]:g}")
        u = res.state
        if scheme == "li-bdf3":
            u = linear_implicit_correction(problem, history, times[i], u)
        states[i] = u
        history.push(times[i], u)
    return Trajectory(times, states)


def observed_orders(hs, errors) -> np.ndarray:
    """Pairwise orders ``log(e_i/e_{i-1}) / log(h_i/h_{i-1})``; first entry NaN."""
    hs, errors = np.asarray(hs, float), np.asarray(errors, float)
    out = np.full(hs.size, np.nan)
    out[1:] = np.log(errors[1:] / errors[:-1]) / np.log(hs[1:] / hs[:-1])
    return out


def fitted_order(hs, errors) -> float:
    """Least-squares slope of log(error) against log(h)."""
    slope, _ = np.polyfit(np.log(hs), np.log(errors), 1)
    return float(slope)


def convergence_sweep(problem: ManufacturedProblem, scheme: str, hs, t_end: float,
                      newton: NewtonConfig | None = None,
                      error_fn: Callable[[Trajectory], float] | None = None) -> list[tuple[float, float]]:
    """Max-in-time error of each constant-step run, as ``(h, error)`` pairs."""
    out = []
    for h in hs:
        traj = integrate_constant(problem, scheme, h, t_end, newton=newton)
        if error_fn is None:
            exact = np.array([problem.exact(t) for t in traj.times])
            err = float(np.max(np.abs(traj.states - exact)))
        else:
            err = error_fn(traj)
        out.append((float(h), err))
    return out
