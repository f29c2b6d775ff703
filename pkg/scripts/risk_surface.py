"""Oracle integrated risk of ridge, lasso and pretest over a spike-and-normal grid.

    python3 scripts/risk_surface.py --out results/risk_surface.csv

Each row holds the risk-minimizing lambda per estimator; the printed map shows
which estimator wins in each (p, mu0, sigma0) cell.
"""
import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from manymeans.risk import risk_surface, spike_normal_grid


@dataclass
class SurfaceArgs:
    out: Path = Path("results/risk_surface.csv")
    ps: tuple = tuple(np.round(np.linspace(0, 0.95, 20), 4))
    mu0s: tuple = (0.0, 2.0, 4.0)
    sigma0s: tuple = (2.0, 4.0, 6.0)
    grid_points: int = 1001


def main(argv=None):
    d = SurfaceArgs()
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=d.out)
    p.add_argument("--grid", type=int, default=d.grid_points)
    a = p.parse_args(argv)
    args = SurfaceArgs(out=a.out, grid_points=a.grid)

    surf = risk_surface(spike_normal_grid(args.ps, args.mu0s, args.sigma0s), args.grid_points)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    surf.to_csv(args.out)

    letter = {"ridge": "R", "lasso": "L", "pretest": "P"}
    cols = [(m, s) for m in args.mu0s for s in args.sigma0s]
    print("p      " + " ".join(f"{m:g}/{s:g}".rjust(5) for m, s in cols))
    for pval in args.ps:
        cells = " ".join(letter[surf.best(float(pval), m, s)].rjust(5) for m, s in cols)
        print(f"{float(pval):<6.3f} {cells}")
    print(f"columns are mu0/sigma0; R=ridge L=lasso P=pretest; wrote {args.out}")


if __name__ == "__main__":
    main()
