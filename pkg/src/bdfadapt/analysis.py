"""Post-processing helpers: sampling a run at given times and comparing runs."""

from __future__ import annotations

import numpy as np

from .problem import DAEProblem


class StateSampler:
    """Observer that records states linearly interpolated at requested times.

    Pass an instance as ``observer=`` to a run. Requested times outside the
    run's span are left unset.
    """

    def __init__(self, times):
        self.times = np.sort(np.asarray(times, dtype=float))
        self.states: dict[int, np.ndarray] = {}
        self._prev: tuple[float, np.ndarray] | None = None
        self._next = 0

    def __call__(self, t: float, u: np.ndarray) -> None:
        u = np.array(u, dtype=float)
        while self._next < self.times.size and self.times[self._next] <= t:
            ts = self.times[self._next]
            if ts == t or self._prev is None:
                if ts == t:
                    self.states[self._next] = u.copy()
            else:
                t0, u0 = self._prev
                w = (ts - t0) / (t - t0)
                self.states[self._next] = (1 - w) * u0 + w * u
            self._next += 1
        self._prev = (t, u)

    def result(self) -> np.ndarray:
        missing = [float(self.times[i]) for i in range(self.times.size) if i not in self.states]
        if missing:
            raise ValueError(f"no samples at times {missing[:5]}...")
        return np.array([self.states[i] for i in range(self.times.size)])


class TrajectoryRecorder:
    """Observer that keeps every accepted ``(t, U)``."""

    def __init__(self):
        self.times: list[float] = []
        self.states: list[np.ndarray] = []

    def __call__(self, t, u):
        self.times.append(float(t))
        self.states.append(np.array(u, dtype=float))


def relative_component_errors(problem: DAEProblem, states, references) -> dict[str, np.ndarray]:
    """Per-component ``||U - U_ref|| / ||U_ref||`` for paired rows of two state arrays."""
    part = problem.partition()
    out = {name: np.empty(len(states)) for name in part.names}
    for i, (u, ref) in enumerate(zip(states, references)):
        for name, start, stop in part.components:
            num = problem.l2_norm(name, u[start:stop] - ref[start:stop])
            den = problem.l2_norm(name, ref[start:stop])
            out[name][i] = num / den if den > 0 else (0.0 if num == 0 else np.inf)
    return out
