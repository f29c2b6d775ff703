"""Stein's unbiased risk estimate for ridge, lasso and pretest.

Inputs must be studentized (unit noise variance); callers divide raw estimates
by their standard errors first, see :func:`manymeans.ingest.studentize`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .density import BandwidthRule, KernelDensity
from .estimators import KINDS, Kind, SpikeNormal, mse_curve, shrink
from .numerics import (DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL, RegParam, SeedSpec,
                       as_lambda, minimize_scalar, t_to_lambda)
from .risk import RiskCurve


class NegativeSureWarning(UserWarning):
    """The minimized criterion is below zero, a hint of misspecification."""


@dataclass
class SureCriterion:
    """SURE objective for one estimator kind on a studentized sample.

    For pretest a density estimate of X is needed for the jump terms at
    +/- lambda; by default a Gaussian KDE with Silverman's rule of thumb.
    Any callable density may be supplied instead (e.g. the true marginal).
    """

    kind: Kind
    x: np.ndarray
    density: Optional[Callable] = None
    _sorted_abs: np.ndarray = field(init=False, repr=False)
    _cum_sq: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.kind = Kind.parse(self.kind)
        self.x = np.asarray(self.x, dtype=float).ravel()
        if self.x.size == 0:
            raise ValueError("SURE needs a non-empty sample")
        if not np.isfinite(self.x).all():
            raise ValueError("sample contains non-finite values")
        if self.kind is Kind.PRETEST:
            if self.density is None:
                self.density = _default_density(self.x)
        else:
            self.density = None
        self._sorted_abs = np.sort(np.abs(self.x))
        self._cum_sq = np.concatenate([[0.0], np.cumsum(self._sorted_abs ** 2)])

    @property
    def n(self) -> int:
        return self.x.size

    def __call__(self, lams):
        return sure_curve(self, lams)


def _default_density(x: np.ndarray) -> Callable:
    if x.size < 2 or np.std(x) == 0:
        # A constant sample has no usable KDE; the jump terms then vanish.
        return lambda v: np.zeros_like(np.asarray(v, dtype=float))
    return KernelDensity.fit(x, BandwidthRule.SILVERMAN)


def sure_curve(c: SureCriterion, lams) -> np.ndarray:
    """Vectorized SURE criterion r_n(lambda) over an array of lambdas."""
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    n = c.n
    mean_sq = c._cum_sq[-1] / n
    out = np.empty(lams.shape)
    inf = np.isinf(lams)
    out[inf] = mean_sq
    lf = lams[~inf]
    if c.kind is Kind.RIDGE:
        shrink_frac = lf / (1.0 + lf)
        out[~inf] = mean_sq * shrink_frac ** 2 + 2.0 / (1.0 + lf)
        return out
    # Number of |X_i| <= lambda and the sum of their squares.
    n_in = np.searchsorted(c._sorted_abs, lf, side="right")
    sq_in = c._cum_sq[n_in]
    n_out = n - n_in
    penalty = 2.0 * n_out / n
    if c.kind is Kind.LASSO:
        resid = (sq_in + lf ** 2 * n_out) / n
        out[~inf] = resid + penalty
        return out
    resid = sq_in / n
    jump = 2.0 * lf * (np.asarray(c.density(-lf)) + np.asarray(c.density(lf)))
    out[~inf] = resid + penalty + jump
    return out


def sure_value(c: SureCriterion, lam) -> float:
    return float(sure_curve(c, [as_lambda(lam)])[0])


class SureSelection(NamedTuple):
    lam: RegParam
    value: float
    curve: RiskCurve

    @property
    def negative_minimum(self) -> bool:
        return self.value < 0


def select_sure(c: SureCriterion, grid_points: int = DEFAULT_GRID_POINTS,
                refine_tol: float = DEFAULT_REFINE_TOL, warn: bool = True) -> SureSelection:
    """Minimize SURE over [0, inf]; negative minima are kept and flagged."""
    lam, value = minimize_scalar(c, grid_points, refine_tol, vectorized=True)
    lams = t_to_lambda(np.linspace(0.0, 1.0, grid_points))
    curve = RiskCurve(lams, sure_curve(c, lams), (f"sure_{c.kind.value}",))
    if warn and value < 0:
        warnings.warn(f"SURE minimum for {c.kind.value} is negative ({value:.4g})",
                      NegativeSureWarning, stacklevel=2)
    return SureSelection(lam, value, curve)


def sure_curves_table(x, kinds=KINDS, grid_points: int = DEFAULT_GRID_POINTS) -> RiskCurve:
    """All requested SURE curves on one shared grid; absent kinds are NaN."""
    lams = t_to_lambda(np.linspace(0.0, 1.0, grid_points))
    wanted = {Kind.parse(k) for k in kinds}
    cols = []
    for kind in KINDS:
        if kind in wanted:
            cols.append(sure_curve(SureCriterion(kind, x), lams))
        else:
            cols.append(np.full(lams.shape, np.nan))
    return RiskCurve(lams, np.column_stack(cols), tuple(f"sure_{k.value}" for k in KINDS))


def loss_curve(kind, x, mu, lams) -> np.ndarray:
    """Compound loss (1/n) sum (m(X_i, lambda) - mu_i)^2 for each lambda."""
    return mse_curve(kind, x, mu, lams)


def oracle_loss(kind, x, mu) -> tuple[RegParam, float]:
    """Exact inf over lambda of the realized compound loss, using the true means.

    Ridge is quadratic in 1/(1+lambda). Pretest loss is a step function whose
    value changes only at lambda = |x_i|. Lasso loss is piecewise quadratic
    between consecutive |x_i|; each piece's stationary point is a candidate.
    """
    kind = Kind.parse(kind)
    x = np.asarray(x, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if kind is Kind.RIDGE:
        sxx = float(x @ x)
        c = 1.0 if sxx == 0 else min(max(float(x @ mu) / sxx, 0.0), 1.0)
        cands = np.array([0.0, math.inf, (1.0 / c - 1.0) if c > 0 else math.inf])
    else:
        a = np.abs(x)
        cands = np.concatenate([[0.0, math.inf], a])
        if kind is Kind.LASSO:
            order = np.argsort(-a)
            s = np.sign(x[order]) * (x[order] - mu[order])
            k = np.arange(1, x.size + 1)
            stationary = np.cumsum(s) / k
            upper = a[order]
            lower = np.append(a[order][1:], 0.0)
            cands = np.concatenate([cands, np.clip(stationary, lower, upper)])
    losses = loss_curve(kind, x, mu, cands)
    # Smallest lambda among the minima.
    best = losses.min()
    lam = float(np.min(cands[losses == best]))
    return RegParam.from_lambda(lam), float(best)


class GapEstimate(NamedTuple):
    mean: float
    se: float
    gaps: np.ndarray


def sure_oracle_gap(dgp: SpikeNormal, n: int, reps: int, kind, seed: SeedSpec,
                    selector: Optional[Callable] = None,
                    grid_points: int = DEFAULT_GRID_POINTS) -> GapEstimate:
    """Mean excess loss L_n(lambda_hat) - inf_lambda L_n(lambda) over replications.

    ``selector(x, mu)`` returns the lambda to evaluate; the default minimizes
    SURE and ignores ``mu``.
    """
    from .simulate import draw_means, draw_sample

    if dgp.sigma != 1.0:
        raise ValueError("SURE assumes unit noise variance")
    kind = Kind.parse(kind)
    if selector is None:
        def selector(x, mu):
            return select_sure(SureCriterion(kind, x), grid_points, warn=False).lam
    gaps = np.empty(reps)
    for r in range(reps):
        rng = seed.child(r).rng()
        mu = draw_means(dgp, n, rng)
        x = draw_sample(mu, rng)
        lam_hat = selector(x, mu)
        achieved = float(np.mean((shrink(kind, x, lam_hat) - mu) ** 2))
        best = oracle_loss(kind, x, mu)[1]
        gaps[r] = achieved - best
    se = float(np.std(gaps, ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
    return GapEstimate(float(np.mean(gaps)), se, gaps)
