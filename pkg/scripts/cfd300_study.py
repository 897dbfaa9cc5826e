"""Adaptive coarse CFD-300 run against the constant-dt_min BDF2 reference.

Writes ``steps.csv`` (accepted adaptive steps, both estimators), and
``errors.csv`` (relative per-component L2 error at each accepted time
t >= 0.1). The reference takes 20,000 steps; pass ``--skip-reference``
to stop after the adaptive run.

    python scripts/cfd300_study.py [--refine 0] [--out runs/cfd300_study]
"""

import argparse
import csv
import time
from pathlib import Path

import numpy as np

from bdfadapt.analysis import StateSampler, TrajectoryRecorder, relative_component_errors
from bdfadapt.controller import ControllerConfig, run, run_constant
from bdfadapt.fem import build_cfd300


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--refine", type=int, default=0)
    ap.add_argument("--tol", type=float, default=1e-3)
    ap.add_argument("--t-end", type=float, default=2.0)
    ap.add_argument("--out", default="runs/cfd300_study")
    ap.add_argument("--skip-reference", action="store_true")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    prob = build_cfd300(args.refine)
    cfg = ControllerConfig(tol=args.tol, estimator="both")
    rec = TrajectoryRecorder()
    t0 = time.perf_counter()
    log = run(prob, cfg, 0.0, args.t_end, observer=rec)
    s = log.summary()
    print(f"{prob.size} DoFs: {s['accepted_steps']} accepted, {s['rejected_attempts']} rejected, "
          f"{s['forced_acceptances']} forced, {time.perf_counter() - t0:.0f}s")

    with open(out / "steps.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "dt", "est_li", "est_impl", "est_velocity", "est_pressure",
                    "retries", "seconds_li", "seconds_impl"])
        for r in log.adaptive:
            w.writerow([r.t, r.dt, r.est_li, r.est_impl, r.est["velocity"], r.est["pressure"],
                        r.retries, r.seconds_li, r.seconds_impl])
    li = log.column("seconds_li")
    im = log.column("seconds_impl")
    print(f"estimator cost: LI {np.nanmean(li) * 1e3:.1f} ms, implicit {np.nanmean(im) * 1e3:.1f} ms")

    if args.skip_reference:
        return
    times = np.array(rec.times)
    keep = times >= 0.1
    sampler = StateSampler(times[keep])
    t0 = time.perf_counter()
    run_constant(prob, cfg.dt_min, 0.0, args.t_end, observer=sampler)
    print(f"reference: {time.perf_counter() - t0:.0f}s")
    errs = relative_component_errors(prob, np.array(rec.states)[keep], sampler.result())
    with open(out / "errors.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + list(errs))
        for i, t in enumerate(times[keep]):
            w.writerow([t] + [v[i] for v in errs.values()])
    for k, v in errs.items():
        print(f"max relative {k} error: {v.max():.3e}")


if __name__ == "__main__":
    main()
