"""Command-line driver.

    bdfadapt run --config cfg.toml [--estimator {implicit,li,both}] [--refine N] [--out DIR]
    bdfadapt convergence {stiff_ode,saddle_dae,polynomial} [--out DIR]
    bdfadapt compare-estimators --config cfg.toml [--refine N] [--out DIR]
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import controller as ctl
from .config import ConfigError, RunConfig, build_problem, load_config
from .nonlinear import NewtonConfig
from .verification import convergence_sweep, observed_orders

log = logging.getLogger("bdfadapt")

STEP_COLUMNS = ["n", "t", "dt", "est_total", "est_velocity", "est_pressure",
                "retries", "newton_iters", "estimator_seconds"]
BOTH_COLUMNS = ["est_total_impl", "est_total_li"]
ORDER_COLUMNS = ["scheme", "h", "error", "observed_order"]
COMPARE_COLUMNS = ["n", "t", "est_total_impl", "est_total_li", "ratio", "seconds_impl", "seconds_li"]

CONVERGENCE_STEPS = (1e-2, 5e-3, 2.5e-3, 1.25e-3)
CONVERGENCE_SCHEMES = {
    "stiff_ode": ("bdf2", "bdf3", "li-bdf3"),
    "saddle_dae": ("bdf2", "bdf3", "li-bdf3"),
    "polynomial": ("bdf2", "bdf3"),
}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return ""
    return repr(x)


def step_row(rec: ctl.StepRecord, both: bool) -> list[str]:
    row = [rec.n, rec.t, rec.dt, rec.est_total, rec.est.get("velocity", math.nan),
           rec.est.get("pressure", math.nan), rec.retries, rec.newton_iters, rec.estimator_seconds]
    if both:
        row += [rec.est_impl, rec.est_li]
    return [_fmt(v) for v in row]


class _StepWriter:
    """Streams accepted steps to ``steps.csv`` and every attempt to ``attempts.csv``."""

    def __init__(self, out: Path, both: bool):
        self.both = both
        self._steps = open(out / "steps.csv", "w", newline="")
        self._attempts = open(out / "attempts.csv", "w", newline="")
        self.steps = csv.writer(self._steps)
        self.attempts = csv.writer(self._attempts)
        header = STEP_COLUMNS + (BOTH_COLUMNS if both else [])
        self.steps.writerow(header)
        self.attempts.writerow(header + ["accepted", "forced", "final", "kind"])

    def __call__(self, rec: ctl.StepRecord):
        row = step_row(rec, self.both)
        if rec.accepted:
            self.steps.writerow(row)
            self._steps.flush()
        self.attempts.writerow(row + [_fmt(rec.accepted), _fmt(rec.forced), _fmt(rec.final), rec.kind])
        self._attempts.flush()

    def close(self):
        self._steps.close()
        self._attempts.close()


def _snapshot_observer(problem, times, out: Path):
    from .analysis import StateSampler
    from .fem.export import write_mesh, write_snapshot

    if not times or not hasattr(problem, "mesh"):
        return None, lambda: None
    write_mesh(problem.mesh, out)
    sampler = StateSampler(times)

    def finish():
        for i, t in enumerate(sampler.times):
            if i in sampler.states:
                write_snapshot(problem, sampler.states[i], out / f"snapshot_{i:03d}.txt", t)

    return sampler, finish


def execute(cfg: RunConfig, out: Path) -> tuple[int, ctl.RunLog | None]:
    """Run one configuration, writing all outputs into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    problem = build_problem(cfg.problem)
    both = cfg.controller.estimator == "both" and not cfg.reference
    writer = _StepWriter(out, both)
    observer, finish = _snapshot_observer(problem, cfg.snapshot_times, out)
    p = cfg.problem
    code, runlog = 0, None
    try:
        if cfg.reference:
            runlog = ctl.run_constant(problem, cfg.controller.dt_min, p.t0, p.t_end,
                                      cfg.controller.newton, observer=observer, on_record=writer)
        else:
            runlog = ctl.run(problem, cfg.controller, p.t0, p.t_end, on_record=writer, observer=observer)
    except ctl.RunAborted as exc:
        log.error("run aborted: %s", exc)
        runlog, code = exc.log, 2
    finally:
        writer.close()
    finish()
    summary = runlog.summary()
    summary["problem"] = p.id
    summary["dofs"] = problem.size
    summary["reference"] = cfg.reference
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    return code, runlog


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "estimator", None):
        cfg = dataclasses.replace(cfg, controller=dataclasses.replace(cfg.controller, estimator=args.estimator))
    if getattr(args, "refine", None) is not None:
        cfg = dataclasses.replace(cfg, problem=dataclasses.replace(cfg.problem, refine=args.refine))
    if getattr(args, "out", None):
        cfg = dataclasses.replace(cfg, output_dir=args.out)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def cmd_run(args) -> int:
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    code, runlog = execute(cfg, Path(cfg.output_dir))
    s = runlog.summary()
    print(f"{cfg.problem.id}: {s['accepted_steps']} accepted steps, {s['rejected_attempts']} rejected, "
          f"final time {s['final_time']:g}" + (f" (aborted: {s['aborted']})" if s["aborted"] else ""))
    return code


def convergence_rows(problem_id: str, hs=CONVERGENCE_STEPS, t_end: float = 1.0) -> list[tuple]:
    from .config import ProblemSpec

    problem = build_problem(ProblemSpec(id=problem_id))
    newton = NewtonConfig(abs_tol=1e-12, rel_tol=1e-15)
    rows = []
    for scheme in CONVERGENCE_SCHEMES[problem_id]:
        pairs = convergence_sweep(problem, scheme, hs, t_end, newton=newton)
        errs = [e for _, e in pairs]
        orders = observed_orders(hs, errs) if all(e > 0 for e in errs) else [math.nan] * len(hs)
        rows += [(scheme, h, e, o) for (h, e), o in zip(pairs, orders)]
    return rows


def cmd_convergence(args) -> int:
    if args.problem not in CONVERGENCE_SCHEMES:
        print(f"error: convergence needs one of {sorted(CONVERGENCE_SCHEMES)}", file=sys.stderr)
        return 1
    out = Path(args.out or f"runs/convergence_{args.problem}")
    out.mkdir(parents=True, exist_ok=True)
    rows = convergence_rows(args.problem, t_end=args.t_end)
    with open(out / "orders.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ORDER_COLUMNS)
        for scheme, h, e, o in rows:
            w.writerow([scheme, _fmt(h), _fmt(e), _fmt(o)])
    for scheme in CONVERGENCE_SCHEMES[args.problem]:
        last = [r for r in rows if r[0] == scheme][-1]
        print(f"{scheme:8s} final error {last[2]:.3e}  observed order {last[3]:.3f}")
    return 0


def cmd_compare_estimators(args) -> int:
    args.estimator = "both"
    try:
        cfg = _apply_overrides(load_config(args.config), args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    cfg = dataclasses.replace(cfg, reference=False)
    out = Path(cfg.output_dir)
    code, runlog = execute(cfg, out)
    recs = runlog.adaptive
    with open(out / "compare.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COMPARE_COLUMNS)
        for r in recs:
            ratio = r.est_li / r.est_impl if r.est_impl > 0 else math.nan
            w.writerow([_fmt(v) for v in (r.n, r.t, r.est_impl, r.est_li, ratio, r.seconds_impl, r.seconds_li)])
    if recs:
        si = np.array([r.seconds_impl for r in recs])
        sl = np.array([r.seconds_li for r in recs])
        ratio = np.array([r.est_li / r.est_impl for r in recs if r.est_impl > 0])
        print(f"implicit estimator: {si.mean():.4f} +- {si.std():.4f} s per evaluation")
        print(f"LI estimator:       {sl.mean():.4f} +- {sl.std():.4f} s per evaluation")
        if ratio.size:
            print(f"est_LI / est_impl in [{ratio.min():.6g}, {ratio.max():.6g}]")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdfadapt", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="TOML or JSON run configuration")
            p.add_argument("--refine", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="reserved")

    p = sub.add_parser("run", help="adaptive (or reference) run")
    common(p)
    p.add_argument("--estimator", choices=ctl.ESTIMATOR_KINDS, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("convergence", help="constant-step order study")
    p.add_argument("problem", choices=sorted(CONVERGENCE_SCHEMES))
    p.add_argument("--t-end", type=float, default=1.0)
    common(p, config=False)
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("compare-estimators", help="run with both estimators evaluated per step")
    common(p)
    p.set_defaults(func=cmd_compare_estimators)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
