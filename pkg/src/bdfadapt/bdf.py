"""Variable-step backward differentiation formulae of orders 1 to 3.

The discrete time derivative at the newest time level is

    Xi(U) = sum_p xi_p U^{n-p},   p = 0..k

with coefficients that depend on the k most recent step sizes. They are
obtained from the order conditions (exactness on polynomials of degree
<= k) rather than from closed-form tables.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

SUPPORTED_ORDERS = (1, 2, 3)


class InvalidStepError(ValueError):
    """A step size is not strictly positive (or not finite)."""


class UnsupportedOrderError(ValueError):
    pass


class HistoryUnderflowError(RuntimeError):
    """Not enough stored states for the requested stencil."""


class LayoutError(ValueError):
    """State vectors do not share the same layout."""


@dataclass(frozen=True)
class BdfStencil:
    order: int
    steps: tuple[float, ...]
    coefficients: np.ndarray

    @property
    def shift(self) -> float:
        """Coefficient of the newest state, the shift of the implicit Jacobian."""
        return float(self.coefficients[0])

    def offsets(self) -> np.ndarray:
        """Node offsets t_{n-p} - t_n for p = 0..k."""
        return -np.concatenate(([0.0], np.cumsum(self.steps)))


def compute_coefficients(k: int, steps: Sequence[float]) -> BdfStencil:
    """Coefficients of the order-``k`` BDF on the given step sizes.

    ``steps`` is newest first: ``[dt_n, dt_{n-1}, ..., dt_{n-k+1}]``.
    The (k+1)x(k+1) order-condition system is solved on offsets scaled by
    the newest step so the matrix entries stay O(1).
    """
    if k not in SUPPORTED_ORDERS:
        raise UnsupportedOrderError(f"BDF order {k} not supported (use 1, 2 or 3)")
    steps = tuple(float(h) for h in steps)
    if len(steps) != k:
        raise InvalidStepError(f"BDF{k} needs {k} step sizes, got {len(steps)}")
    for h in steps:
        if not (np.isfinite(h) and h > 0.0):
            raise InvalidStepError(f"step sizes must be positive and finite, got {h!r}")

    scale = steps[0]
    tau = -np.concatenate(([0.0], np.cumsum(steps))) / scale
    powers = np.arange(k + 1)
    vander = tau[np.newaxis, :] ** powers[:, np.newaxis]
    vander[0, :] = 1.0  # 0**0
    rhs = np.zeros(k + 1)
    rhs[1] = 1.0
    xi = np.linalg.solve(vander, rhs)
    # one step of iterative refinement
    xi += np.linalg.solve(vander, rhs - vander @ xi)
    xi /= scale
    xi.setflags(write=False)
    return BdfStencil(order=k, steps=steps, coefficients=xi)


def order_condition_defects(stencil: BdfStencil) -> np.ndarray:
    """Relative defect of each order condition m = 0..k.

    Defect m is |sum_p xi_p tau_p^m - m 0^(m-1)| divided by
    sum_p |xi_p tau_p^m| (the floating-point scale of the sum).
    """
    tau = stencil.offsets()
    xi = stencil.coefficients
    out = np.empty(stencil.order + 1)
    for m in range(stencil.order + 1):
        terms = xi * tau**m if m else xi.copy()
        target = 1.0 if m == 1 else 0.0
        out[m] = abs(terms.sum() - target) / np.abs(terms).sum()
    return out


class HistoryBuffer:
    """Most recent accepted ``(time, state)`` pairs, newest first."""

    capacity = 4

    def __init__(self, entries: Sequence[tuple[float, np.ndarray]] = ()):
        self._entries: deque[tuple[float, np.ndarray]] = deque(maxlen=self.capacity)
        for t, u in reversed(list(entries)):
            self.push(t, u)

    def push(self, t: float, state: np.ndarray) -> None:
        state = np.asarray(state, dtype=float)
        if self._entries:
            t_last, u_last = self._entries[0]
            if not t > t_last:
                raise ValueError(f"history times must increase: {t} after {t_last}")
            if state.shape != u_last.shape:
                raise LayoutError(f"state shape {state.shape} != {u_last.shape}")
        self._entries.appendleft((float(t), state))

    def copy(self) -> "HistoryBuffer":
        return HistoryBuffer(list(self._entries))

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[tuple[float, np.ndarray]]:
        return iter(self._entries)

    def __getitem__(self, i: int) -> tuple[float, np.ndarray]:
        return self._entries[i]

    @property
    def times(self) -> list[float]:
        return [t for t, _ in self._entries]

    @property
    def latest(self) -> tuple[float, np.ndarray]:
        if not self._entries:
            raise HistoryUnderflowError("history is empty")
        return self._entries[0]

    def steps_to(self, t_new: float, k: int) -> list[float]:
        """Step sizes ``[t_new - t_n, t_n - t_{n-1}, ...]`` for an order-k stencil."""
        if len(self) < k:
            raise HistoryUnderflowError(f"BDF{k} needs {k} stored states, have {len(self)}")
        ts = [t_new] + self.times[:k]
        return [ts[i] - ts[i + 1] for i in range(k)]

    def stencil(self, t_new: float, k: int) -> BdfStencil:
        return compute_coefficients(k, self.steps_to(t_new, k))


def apply_xi(stencil: BdfStencil, newest: np.ndarray, history: HistoryBuffer) -> np.ndarray:
    """Discrete derivative ``xi_0 newest + sum_{p>=1} xi_p U^{n+1-p}``."""
    k = stencil.order
    if len(history) < k:
        raise HistoryUnderflowError(f"BDF{k} needs {k} stored states, have {len(history)}")
    times = history.times[:k]
    for p in range(1, k):
        h = times[p - 1] - times[p]
        if not np.isclose(h, stencil.steps[p], rtol=1e-10, atol=0.0):
            raise ValueError(f"history step {h} does not match stencil step {stencil.steps[p]}")
    newest = np.asarray(newest, dtype=float)
    xi = stencil.coefficients
    out = xi[0] * newest
    for p in range(1, k + 1):
        u = history[p - 1][1]
        if u.shape != newest.shape:
            raise LayoutError(f"state shape {u.shape} != {newest.shape}")
        out = out + xi[p] * u
    return out
