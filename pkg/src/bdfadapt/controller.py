"""Adaptive BDF2 time stepping driven by a BDF2/BDF3 error estimate.

Start-up: one implicit Euler step and one BDF2 step, both of size
``dt_min``. Afterwards every step is a BDF2 step whose size comes from

    kappa* = (tol / est)^(1 / (q + 1))
    dt*    = clamp(clamp(kappa_s kappa*, kappa_min, kappa_max) dt, dt_min, dt_max)
    dt_new = clamp(alpha0 dt + alpha1 dt*, dt_min, dt_max)      (after acceptance)

A step is accepted when ``est < tol``. Otherwise it is recomputed with
``dt*`` (no smoothing) for at most ``max_retries`` more attempts; the last
attempt is accepted regardless and flagged as forced.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from .bdf import HistoryBuffer, compute_coefficients
from .estimators import EstimateReport, estimate_implicit, estimate_linear_implicit
from .nonlinear import LinearSolverError, NewtonConfig, solve_implicit_step
from .problem import DAEProblem

log = logging.getLogger(__name__)

ESTIMATOR_KINDS = ("implicit", "li", "both")


class RunAborted(RuntimeError):
    def __init__(self, message: str, log_: "RunLog"):
        super().__init__(message)
        self.log = log_


@dataclass(frozen=True)
class ControllerConfig:
    tol: float = 1e-3
    q: int = 2
    kappa_min: float = 0.1
    kappa_max: float = 1.5
    kappa_s: float = 0.9
    dt_min: float = 1e-4
    dt_max: float = 1e-1
    alpha0: float = 0.3
    alpha1: float = 0.7
    max_retries: int = 5
    estimator: str = "li"
    relative_norms: bool = False
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if not 0 < self.kappa_min < 1 < self.kappa_max:
            raise ValueError("need 0 < kappa_min < 1 < kappa_max")
        if not 0 < self.kappa_s < 1:
            raise ValueError("need 0 < kappa_s < 1")
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_max")
        if self.alpha0 < 0 or self.alpha1 < 0 or not math.isclose(self.alpha0 + self.alpha1, 1.0, abs_tol=1e-12):
            raise ValueError("alpha0, alpha1 must be non-negative and sum to 1")
        if self.max_retries < 1:
            raise ValueError("max_retries must be >= 1")
        if self.estimator not in ESTIMATOR_KINDS:
            raise ValueError(f"estimator must be one of {ESTIMATOR_KINDS}")

    @property
    def max_growth(self) -> float:
        """Largest accepted-to-accepted step ratio away from the bounds."""
        return self.alpha0 + self.alpha1 * self.kappa_max


@dataclass
class StepRecord:
    n: int
    t: float
    dt: float
    est_total: float = math.nan
    est: dict[str, float] = field(default_factory=dict)
    retries: int = 0
    newton_iters: int = 0
    estimator_seconds: float = math.nan
    accepted: bool = True
    kind: str = "adaptive"          # startup | adaptive | reference
    forced: bool = False            # accepted after exhausting retries
    final: bool = False             # size adjusted to land on the end time
    est_impl: float = math.nan
    est_li: float = math.nan
    est_impl_components: dict[str, float] = field(default_factory=dict)
    seconds_impl: float = math.nan
    seconds_li: float = math.nan


@dataclass
class RunLog:
    records: list[StepRecord] = field(default_factory=list)
    t_end: float = math.nan
    final_state: np.ndarray | None = field(default=None, repr=False)
    aborted: str | None = None

    @property
    def accepted(self) -> list[StepRecord]:
        return [r for r in self.records if r.accepted]

    @property
    def adaptive(self) -> list[StepRecord]:
        return [r for r in self.records if r.accepted and r.kind == "adaptive"]

    def summary(self) -> dict:
        acc = self.accepted
        est_cost = [r.estimator_seconds for r in self.records if not math.isnan(r.estimator_seconds)]
        return {
            "accepted_steps": len(acc),
            "rejected_attempts": sum(1 for r in self.records if not r.accepted),
            "forced_acceptances": sum(1 for r in acc if r.forced),
            "total_estimator_seconds": float(sum(est_cost)),
            "estimator_evaluations": len(est_cost),
            "final_time": acc[-1].t if acc else self.t_end,
            "aborted": self.aborted,
        }

    def column(self, name: str, accepted_only: bool = True) -> np.ndarray:
        recs = self.accepted if accepted_only else self.records
        return np.array([getattr(r, name) for r in recs], dtype=float)


def kappa_star(est: float, cfg: ControllerConfig) -> float:
    """``(tol / est)^(1/(q+1))``; vanishing estimates map to ``kappa_max``."""
    if est < 0 or math.isnan(est):
        raise ValueError(f"error estimate must be non-negative, got {est}")
    if est <= 1e-14 * cfg.tol:
        return cfg.kappa_max
    if math.isinf(est):
        return 0.0
    return (cfg.tol / est) ** (1.0 / (cfg.q + 1))


def predict_step(dt: float, kappa: float, cfg: ControllerConfig) -> float:
    ratio = min(cfg.kappa_max, max(cfg.kappa_min, cfg.kappa_s * kappa))
    return min(cfg.dt_max, max(ratio * dt, cfg.dt_min))


def smooth_step(dt: float, dt_star: float, cfg: ControllerConfig) -> float:
    return min(cfg.dt_max, max(cfg.alpha0 * dt + cfg.alpha1 * dt_star, cfg.dt_min))


def _fit_to_end(dt: float, remaining: float, cfg: ControllerConfig) -> tuple[float, bool]:
    """Step size that avoids leaving a sliver shorter than ``dt_min`` before the end."""
    if dt >= remaining * (1 - 1e-12):
        return remaining, True
    if remaining - dt < cfg.dt_min:
        if remaining <= cfg.dt_max:
            return remaining, True
        return 0.5 * remaining, False
    return dt, False


Observer = Callable[[float, np.ndarray], None]


class _Runner:
    def __init__(self, problem: DAEProblem, cfg: ControllerConfig, t0: float, t_end: float,
                 on_record: Callable[[StepRecord], None] | None, observer: Observer | None):
        self.problem = problem
        self.cfg = cfg
        self.t0, self.t_end = t0, t_end
        self.on_record = on_record
        self.observer = observer
        self.log = RunLog(t_end=t_end)
        self.history = HistoryBuffer()
        self.n = 0

    def emit(self, rec: StepRecord):
        self.log.records.append(rec)
        if self.on_record is not None:
            self.on_record(rec)

    def accept(self, t: float, u: np.ndarray):
        if not np.all(np.isfinite(u)):
            self.abort(f"non-finite accepted state at t={t:g}")
        self.history.push(t, u)
        self.log.final_state = u
        if self.observer is not None:
            self.observer(t, u)

    def abort(self, message: str):
        log.error(message)
        self.log.aborted = message
        raise RunAborted(message, self.log)

    def newton(self, k: int, t_new: float):
        stencil = compute_coefficients(k, self.history.steps_to(t_new, k))
        try:
            return solve_implicit_step(self.problem, stencil, self.history, t_new, cfg=self.cfg.newton)
        except LinearSolverError as exc:
            log.warning("linear solver failed at t=%g: %s", t_new, exc)
            return None

    def fixed_step(self, k: int, dt: float, kind: str):
        t, _ = self.history.latest
        t_new = t + dt
        if abs(self.t_end - t_new) <= 1e-12 * max(1.0, abs(self.t_end)):
            t_new = self.t_end
        res = self.newton(k, t_new)
        if res is None or not res.converged:
            self.emit(StepRecord(self.n + 1, t_new, dt, accepted=False, kind=kind,
                                 newton_iters=res.iterations if res else 0))
            self.abort(f"Newton failed in {kind} BDF{k} step at t={t_new:g}")
        self.n += 1
        self.emit(StepRecord(self.n, t_new, t_new - t, kind=kind, newton_iters=res.iterations))
        self.accept(t_new, res.state)

    def evaluate(self, t_new: float, u2: np.ndarray) -> tuple[EstimateReport, StepRecord]:
        cfg = self.cfg
        rec = StepRecord(0, t_new, 0.0)
        if cfg.estimator in ("li", "both"):
            li = estimate_linear_implicit(self.problem, self.history, t_new, u2, cfg.relative_norms)
            rec.est_li, rec.seconds_li = li.total, li.cost
        if cfg.estimator in ("implicit", "both"):
            im = estimate_implicit(self.problem, self.history, t_new, u2, cfg.newton, cfg.relative_norms)
            rec.est_impl, rec.seconds_impl = im.total, im.cost
            rec.est_impl_components = dict(im.per_component)
        driver = im if cfg.estimator == "implicit" else li
        rec.est_total = driver.total
        rec.est = dict(driver.per_component)
        rec.estimator_seconds = driver.cost
        return driver, rec

    def adaptive(self):
        cfg = self.cfg
        dt = cfg.dt_min
        while True:
            t, _ = self.history.latest
            remaining = self.t_end - t
            if remaining <= 1e-12 * max(1.0, abs(self.t_end)):
                return
            dt_try, final = _fit_to_end(dt, remaining, cfg)
            retries = 0
            while True:
                t_new = self.t_end if final else t + dt_try
                res = self.newton(2, t_new)
                solved = res is not None and res.converged
                if solved:
                    report, rec = self.evaluate(t_new, res.state)
                    est = report.total
                else:
                    rec = StepRecord(0, t_new, 0.0, est_total=math.inf)
                    est = math.inf
                rec.t, rec.dt, rec.retries, rec.final = t_new, t_new - t, retries, final
                rec.newton_iters = res.iterations if res is not None else 0
                if est < cfg.tol:
                    break
                dt_star = predict_step(dt_try, kappa_star(est, cfg), cfg)
                at_floor = dt_try <= cfg.dt_min and dt_star >= dt_try
                if retries >= cfg.max_retries or at_floor:
                    if not solved:
                        rec.accepted = False
                        self.emit(rec)
                        self.abort(f"BDF2 Newton failed at t={t_new:g} with dt={dt_try:g} "
                                   f"after {retries} retries")
                    rec.forced = True
                    break
                rec.accepted = False
                rec.n = self.n + 1
                self.emit(rec)
                retries += 1
                dt_try, final = _fit_to_end(dt_star, remaining, cfg)
            self.n += 1
            rec.n = self.n
            self.emit(rec)
            self.accept(t_new, res.state)
            dt_star = predict_step(dt_try, kappa_star(est, cfg), cfg)
            dt = smooth_step(dt_try, dt_star, cfg)


def run(problem: DAEProblem, cfg: ControllerConfig, t0: float, t_end: float,
        on_record: Callable[[StepRecord], None] | None = None,
        observer: Observer | None = None) -> RunLog:
    """Integrate from ``t0`` to ``t_end`` adaptively.

    ``on_record`` sees every attempt as it is logged; ``observer(t, U)``
    sees every accepted state including the initial one. Raises
    :class:`RunAborted` (carrying the partial log) on unrecoverable failure.
    """
    if t_end < t0:
        raise ValueError("t_end must not precede t0")
    runner = _Runner(problem, cfg, t0, t_end, on_record, observer)
    runner.accept(t0, problem.initial_state(t0))
    if t_end == t0:
        return runner.log
    for k in (1, 2):
        t = runner.history.latest[0]
        remaining = t_end - t
        if remaining <= 0:
            return runner.log
        runner.fixed_step(k, min(cfg.dt_min, remaining), "startup")
    runner.adaptive()
    return runner.log


def run_constant(problem: DAEProblem, dt: float, t0: float, t_end: float,
                 newton: NewtonConfig | None = None, observer: Observer | None = None,
                 on_record: Callable[[StepRecord], None] | None = None) -> RunLog:
    """Constant-step BDF2 reference (implicit Euler for the first step)."""
    cfg = ControllerConfig(dt_min=dt, dt_max=dt, newton=newton or NewtonConfig())
    runner = _Runner(problem, cfg, t0, t_end, on_record, observer)
    runner.accept(t0, problem.initial_state(t0))
    n_steps = int(math.ceil((t_end - t0) / dt - 1e-9))
    for i in range(n_steps):
        t = runner.history.latest[0]
        # target t0 + (i+1) dt directly so roundoff does not accumulate over long runs
        runner.fixed_step(1 if i == 0 else 2, min(t0 + (i + 1) * dt, t_end) - t, "reference")
    return runner.log


def config_dict(cfg: ControllerConfig) -> dict:
    return asdict(cfg)
