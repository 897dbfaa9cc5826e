"""Contract for semi-discrete systems ``R(t, dU/dt, U) = 0``.

States are flat float arrays. A :class:`ComponentPartition` names the
contiguous blocks of a state (velocity, pressure, ...) so that error
estimates can be taken component by component.
"""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import Iterable

import numpy as np
import scipy.sparse as sp

from .bdf import LayoutError


@dataclass(frozen=True)
class ComponentPartition:
    """Ordered named blocks ``(name, start, stop)`` tiling ``[0, size)``."""

    components: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        names = [c[0] for c in self.components]
        if len(set(names)) != len(names):
            raise ValueError(f"component names must be unique: {names}")
        pos = 0
        for name, start, stop in self.components:
            if start != pos or stop <= start:
                raise ValueError(f"component {name!r} range [{start}, {stop}) does not tile")
            pos = stop

    @classmethod
    def from_sizes(cls, sizes: Iterable[tuple[str, int]]) -> "ComponentPartition":
        comps, pos = [], 0
        for name, n in sizes:
            comps.append((name, pos, pos + n))
            pos += n
        return cls(tuple(comps))

    @property
    def size(self) -> int:
        return self.components[-1][2] if self.components else 0

    @property
    def names(self) -> list[str]:
        return [c[0] for c in self.components]

    def slice(self, name: str) -> slice:
        for n, start, stop in self.components:
            if n == name:
                return slice(start, stop)
        raise KeyError(name)

    def split(self, u: np.ndarray) -> dict[str, np.ndarray]:
        self.check(u)
        return {n: u[start:stop] for n, start, stop in self.components}

    def check(self, u: np.ndarray) -> None:
        if np.shape(u) != (self.size,):
            raise LayoutError(f"state of shape {np.shape(u)} does not match partition size {self.size}")


class DAEProblem(abc.ABC):
    """Base class for problems of the form ``R(t, Udot, U) = 0``.

    Subclasses implement :meth:`residual` and :meth:`partition`. The
    default :meth:`jacobian` uses central differences, which is fine for
    the small verification problems; finite-element problems override it.
    """

    @abc.abstractmethod
    def residual(self, t: float, udot: np.ndarray, u: np.ndarray) -> np.ndarray: ...

    @abc.abstractmethod
    def partition(self) -> ComponentPartition: ...

    @abc.abstractmethod
    def initial_state(self, t0: float) -> np.ndarray: ...

    def jacobian(self, t: float, udot: np.ndarray, u: np.ndarray, shift: float) -> sp.csr_matrix:
        """``shift * dR/dUdot + dR/dU``."""
        return fd_jacobian(self, t, udot, u, shift)

    def l2_norm(self, name: str, values: np.ndarray) -> float:
        """Norm of one component block. Euclidean unless overridden."""
        return float(np.linalg.norm(values))

    def constrained_dofs(self) -> np.ndarray:
        """Indices whose residual rows are Dirichlet rows ``u_i - g_i(t)``."""
        return np.empty(0, dtype=int)

    def apply_constraints(self, t: float, u: np.ndarray) -> np.ndarray:
        """Copy of ``u`` with Dirichlet values at time ``t`` written in."""
        return np.array(u, dtype=float)

    @property
    def size(self) -> int:
        return self.partition().size


def fd_jacobian(problem: DAEProblem, t, udot, u, shift, rel_step=1e-7) -> sp.csr_matrix:
    """Dense central-difference Jacobian, returned as CSR."""
    u = np.asarray(u, dtype=float)
    udot = np.asarray(udot, dtype=float)
    n = u.size
    J = np.empty((n, n))
    for j in range(n):
        h = rel_step * max(1.0, abs(u[j]))
        e = np.zeros(n)
        e[j] = h
        rp = problem.residual(t, udot + shift * e, u + e)
        rm = problem.residual(t, udot - shift * e, u - e)
        J[:, j] = (rp - rm) / (2 * h)
    return sp.csr_matrix(J)


def check_jacobian(problem: DAEProblem, t, udot, u, shift, directions=None, n_probe=4,
                   h=None, seed=0) -> float:
    """Largest relative mismatch between ``J d`` and a central difference of R.

    ``U`` moves by ``h d`` and ``Udot`` by ``shift * h d``, matching the
    combined-shift Jacobian. Returns ``max |J d - fd| / (|J d| + eps)``
    with infinity norms, over the probe directions.
    """
    u = np.asarray(u, dtype=float)
    udot = np.asarray(udot, dtype=float)
    if directions is None:
        rng = np.random.default_rng(seed)
        directions = [rng.standard_normal(u.size) for _ in range(n_probe)]
    J = problem.jacobian(t, udot, u, shift)
    scale = max(1.0, float(np.max(np.abs(u), initial=0.0)))
    worst = 0.0
    for d in directions:
        d = np.asarray(d, dtype=float)
        if not np.any(d):
            continue
        step = (1e-6 * scale if h is None else h) / np.max(np.abs(d))
        rp = problem.residual(t, udot + shift * step * d, u + step * d)
        rm = problem.residual(t, udot - shift * step * d, u - step * d)
        fd = (rp - rm) / (2 * step)
        jd = J @ d
        err = np.max(np.abs(jd - fd)) / (np.max(np.abs(jd)) + np.finfo(float).eps)
        worst = max(worst, float(err))
    return worst
