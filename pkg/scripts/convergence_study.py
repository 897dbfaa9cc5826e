"""Constant-step convergence orders on the manufactured problems.

    python scripts/convergence_study.py [--out runs/convergence]
"""

import argparse
import csv
from pathlib import Path

from bdfadapt.cli import CONVERGENCE_SCHEMES, convergence_rows


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs/convergence")
    ap.add_argument("--t-end", type=float, default=1.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "orders_all.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["problem", "scheme", "h", "error", "observed_order"])
        for problem in CONVERGENCE_SCHEMES:
            for scheme, h, err, order in convergence_rows(problem, t_end=args.t_end):
                w.writerow([problem, scheme, h, err, order])
                print(f"{problem:11s} {scheme:8s} h={h:<8g} error={err:.3e} order={order:.3f}")


if __name__ == "__main__":
    main()
