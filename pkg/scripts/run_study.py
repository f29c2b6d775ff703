"""Run the Monte Carlo comparison of SURE, CV and NPEB selectors.

    python3 scripts/run_study.py --reps 50 --ns 200 --out results/study.csv

Prints, for each cell, the estimator with the lowest mean loss under SURE
tuning, and writes the full table as CSV.
"""
import argparse
import time
from dataclasses import dataclass, field
from pathlib import Path

from manymeans.simulate import SimConfig, run_study


@dataclass
class StudyArgs:
    out: Path = Path("results/study.csv")
    reps: int = 50
    ns: tuple = (200,)
    workers: int = 1
    seed: int = 20240101
    estimators: tuple = ("ridge", "lasso", "pretest", "npeb")
    selectors: tuple = ("sure", "cv")
    include_optimal: bool = True


def parse_args(argv=None) -> StudyArgs:
    d = StudyArgs()
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", type=Path, default=d.out)
    p.add_argument("--reps", type=int, default=d.reps)
    p.add_argument("--ns", type=int, nargs="+", default=list(d.ns))
    p.add_argument("--workers", type=int, default=d.workers)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--estimators", nargs="+", default=list(d.estimators))
    p.add_argument("--selectors", nargs="+", default=list(d.selectors))
    p.add_argument("--no-optimal", action="store_true")
    a = p.parse_args(argv)
    return StudyArgs(a.out, a.reps, tuple(a.ns), a.workers, a.seed, tuple(a.estimators),
                     tuple(a.selectors), not a.no_optimal)


def main(argv=None):
    args = parse_args(argv)
    cfg = SimConfig(ns=args.ns, reps=args.reps, seed=args.seed, workers=args.workers,
                    estimators=args.estimators, selectors=args.selectors,
                    include_optimal=args.include_optimal)
    start = time.perf_counter()
    res = run_study(cfg)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    res.to_csv(args.out)
    print(f"{len(res.rows)} rows in {time.perf_counter() - start:.1f}s -> {args.out}")

    kinds = [e for e in args.estimators if e != "npeb"]
    if "sure" not in args.selectors or not kinds:
        return
    print(f"{'n':>5} {'p':>5} {'mu0':>4} {'sigma0':>6}  best under SURE (mean loss)")
    for d, n in cfg.cells():
        losses = {k: res.get(d.p, d.mu0, d.sigma0, n, k)["mean_loss"] for k in kinds}
        best = min(losses, key=losses.get)
        print(f"{n:>5} {d.p:>5} {d.mu0:>4} {d.sigma0:>6}  {best} ({losses[best]:.3f})")


if __name__ == "__main__":
    main()
