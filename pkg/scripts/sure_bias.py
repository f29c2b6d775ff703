"""How much does the kernel density estimate bias the pretest SURE criterion?

    python3 scripts/sure_bias.py --reps 500

The pretest criterion needs the density of X at +/- lambda. This compares the
mean criterion under the Silverman KDE with the one built on the true marginal
and with the target (integrated risk + 1), for several sample sizes.
"""
import argparse
import math
from dataclasses import dataclass

import numpy as np

from manymeans.estimators import SpikeNormal
from manymeans.numerics import SeedSpec
from manymeans.risk import int_risk
from manymeans.simulate import draw_means, draw_sample
from manymeans.sure import SureCriterion, sure_value


@dataclass
class BiasArgs:
    p: float = 0.5
    mu0: float = 2.0
    sigma0: float = 2.0
    ns: tuple = (50, 200, 1000, 5000)
    lams: tuple = (0.5, 1.0, 2.0)
    reps: int = 500
    seed: int = 7


def main(argv=None):
    d = BiasArgs()
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--reps", type=int, default=d.reps)
    p.add_argument("--ns", type=int, nargs="+", default=list(d.ns))
    p.add_argument("--seed", type=int, default=d.seed)
    a = p.parse_args(argv)
    args = BiasArgs(reps=a.reps, ns=tuple(a.ns), seed=a.seed)

    dgp = SpikeNormal(args.p, args.mu0, args.sigma0)
    print(f"{'n':>6} {'lambda':>6} {'target':>8} {'kde':>8} {'true f':>8} {'kde bias':>9} {'se':>7}")
    for n in args.ns:
        kde = np.empty((args.reps, len(args.lams)))
        exact = np.empty_like(kde)
        for r in range(args.reps):
            rng = SeedSpec(args.seed, n).child(r).rng()
            x = draw_sample(draw_means(dgp, n, rng), rng)
            c_kde = SureCriterion("pretest", x)
            c_true = SureCriterion("pretest", x, density=dgp.marginal_pdf)
            kde[r] = [sure_value(c_kde, lam) for lam in args.lams]
            exact[r] = [sure_value(c_true, lam) for lam in args.lams]
        for j, lam in enumerate(args.lams):
            target = int_risk(dgp, "pretest", lam) + 1.0
            diff = kde[:, j] - exact[:, j]
            se = diff.std(ddof=1) / math.sqrt(args.reps)
            print(f"{n:>6} {lam:>6} {target:>8.4f} {kde[:, j].mean():>8.4f} {exact[:, j].mean():>8.4f} "
                  f"{diff.mean():>9.4f} {se:>7.4f}")


if __name__ == "__main__":
    main()
