import numpy as np
import scipy.sparse as sp

from bdfadapt.problem import ComponentPartition, DAEProblem


class LinearSystem(DAEProblem):
    """``M Udot + A U - f(t) = 0`` with constant matrices."""

    def __init__(self, M, A, f=None, u0=None, names=None):
        self.M = sp.csr_matrix(np.atleast_2d(M))
        self.A = sp.csr_matrix(np.atleast_2d(A))
        self.f = f or (lambda t: np.zeros(self.A.shape[0]))
        self.u0 = np.zeros(self.A.shape[0]) if u0 is None else np.asarray(u0, float)
        self._part = (ComponentPartition.from_sizes(names) if names
                      else ComponentPartition.from_sizes([("u", self.A.shape[0])]))

    def residual(self, t, udot, u):
        return self.M @ udot + self.A @ u - self.f(t)

    def jacobian(self, t, udot, u, shift):
        return sp.csr_matrix(shift * self.M + self.A)

    def partition(self):
        return self._part

    def initial_state(self, t0):
        return self.u0.copy()


class Riccati(DAEProblem):
    """``u' = -u^2``; exact solution ``u0 / (1 + u0 t)``."""

    def residual(self, t, udot, u):
        return udot + u**2

    def jacobian(self, t, udot, u, shift):
        return sp.csr_matrix(np.diag(shift + 2 * u))

    def partition(self):
        return ComponentPartition.from_sizes([("u", 1)])

    def initial_state(self, t0):
        return np.array([1.0])


class Counting(DAEProblem):
    """Wrapper that counts residual and Jacobian evaluations."""

    def __init__(self, inner):
        self.inner = inner
        self.residuals = 0
        self.jacobians = 0

    def residual(self, t, udot, u):
        self.residuals += 1
        return self.inner.residual(t, udot, u)

    def jacobian(self, t, udot, u, shift):
        self.jacobians += 1
        return self.inner.jacobian(t, udot, u, shift)

    def partition(self):
        return self.inner.partition()

    def initial_state(self, t0):
        return self.inner.initial_state(t0)

    def l2_norm(self, name, values):
        return self.inner.l2_norm(name, values)

    def constrained_dofs(self):
        return self.inner.constrained_dofs()

    def apply_constraints(self, t, u):
        return self.inner.apply_constraints(t, u)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
