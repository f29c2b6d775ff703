"""Cross-validated choice of lambda from panels of replicate observations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from .estimators import Kind, MseCurve, SpikeNormal, mse_curve, shrink
from .numerics import (DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL, RegParam, SeedSpec,
                       as_lambda, minimize_scalar, t_to_lambda)
from .risk import RiskCurve


class CvCriterion(str, Enum):
    HOLDOUT = "holdout"
    LEAVE_ONE_OUT = "loo"


@dataclass(frozen=True)
class PanelSample:
    """values[i, j] is replicate j of unit i (n units by k replicates)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("panel values must be an n x k matrix")
        if v.shape[1] < 2:
            raise ValueError(f"cross-validation needs k >= 2 replicates per unit, got k={v.shape[1]}")
        if v.shape[0] < 1 or not np.isfinite(v).all():
            raise ValueError("panel must be non-empty with finite entries")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def means(self) -> np.ndarray:
        return self.values.mean(axis=1)

    def leave_out_means(self, fold: int) -> np.ndarray:
        """Mean over all replicates except ``fold``."""
        return (self.values.sum(axis=1) - self.values[:, fold]) / (self.k - 1)


def _fold(panel: PanelSample, fold) -> int:
    fold = panel.k - 1 if fold is None else int(fold)
    if not 0 <= fold < panel.k:
        raise ValueError(f"fold must be in [0, {panel.k - 1}]")
    return fold


def cv_holdout_curve(panel: PanelSample, kind, lams, fold=None) -> np.ndarray:
    fold = _fold(panel, fold)
    return mse_curve(kind, panel.leave_out_means(fold), panel.values[:, fold], lams)


def cv_loo_curve(panel: PanelSample, kind, lams) -> np.ndarray:
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    total = np.zeros(lams.shape)
    for j in range(panel.k):
        total += cv_holdout_curve(panel, kind, lams, fold=j)
    return total


def cv_holdout(panel: PanelSample, kind, lam, fold=None) -> float:
    """Mean squared error of m(mean of the other k-1 replicates) against the held-out one.

    The last replicate is held out unless ``fold`` says otherwise.
    """
    return float(cv_holdout_curve(panel, kind, [as_lambda(lam)], fold)[0])


def cv_loo(panel: PanelSample, kind, lam) -> float:
    """Sum (not mean) of the hold-out criterion over all k folds."""
    return float(cv_loo_curve(panel, kind, [as_lambda(lam)])[0])


class CvSelection(NamedTuple):
    lam: RegParam
    estimates: np.ndarray
    value: float
    curve: RiskCurve


def select_cv(panel: PanelSample, kind, criterion=CvCriterion.LEAVE_ONE_OUT, *,
              final: str = "full", fold=None, grid_points: int = DEFAULT_GRID_POINTS,
              refine_tol: float = DEFAULT_REFINE_TOL) -> CvSelection:
    """Choose lambda by cross-validation and return the final estimates.

    ``final='full'`` shrinks the k-replicate means; ``final='holdout'`` shrinks
    the means that exclude the hold-out fold, the estimator the hold-out
    criterion is unbiased for.
    """
    kind = Kind.parse(kind)
    criterion = CvCriterion(criterion)
    folds = [_fold(panel, fold)] if criterion is CvCriterion.HOLDOUT else range(panel.k)
    pieces = [MseCurve(kind, panel.leave_out_means(j), panel.values[:, j]) for j in folds]

    def f(l):
        return sum(piece(l) for piece in pieces)
    lam, value = minimize_scalar(f, grid_points, refine_tol, vectorized=True)
    lams = t_to_lambda(np.linspace(0.0, 1.0, grid_points))
    curve = RiskCurve(lams, f(lams), (f"cv_{criterion.value}_{kind.value}",))
    if final == "full":
        base = panel.means()
    elif final == "holdout":
        base = panel.leave_out_means(_fold(panel, fold))
    else:
        raise ValueError("final must be 'full' or 'holdout'")
    return CvSelection(lam, np.asarray(shrink(kind, base, lam)), value, curve)


def cv_oracle_gap(dgp: SpikeNormal, n: int, k: int, reps: int, kind, seed: SeedSpec,
                  criterion=CvCriterion.LEAVE_ONE_OUT, grid_points: int = DEFAULT_GRID_POINTS):
    """Mean excess compound loss of the CV-chosen lambda over the best lambda.

    For hold-out CV the loss is that of m(X_{k-1}, lambda), the estimator whose
    risk hold-out CV estimates. For leave-one-out it is the loss of the final
    full-sample estimator m(X_k, lambda).
    """
    from .simulate import draw_means, draw_panel
    from .sure import GapEstimate, oracle_loss

    kind = Kind.parse(kind)
    criterion = CvCriterion(criterion)
    final = "holdout" if criterion is CvCriterion.HOLDOUT else "full"
    gaps = np.empty(reps)
    for r in range(reps):
        rng = seed.child(r).rng()
        mu = draw_means(dgp, n, rng)
        panel = draw_panel(mu, k, rng, sigma=dgp.sigma)
        sel = select_cv(panel, kind, criterion, final=final, grid_points=grid_points)
        base = panel.means() if final == "full" else panel.leave_out_means(k - 1)
        achieved = float(np.mean((sel.estimates - mu) ** 2))
        gaps[r] = achieved - oracle_loss(kind, base, mu)[1]
    se = float(np.std(gaps, ddof=1) / math.sqrt(reps)) if reps > 1 else math.nan
    return GapEstimate(float(np.mean(gaps)), se, gaps)
