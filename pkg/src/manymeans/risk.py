"""Componentwise, compound and integrated risk of ridge, lasso and pretest.

All formulas assume X ~ N(mu, sigma^2). The lambda = inf endpoint is always
evaluated through its analytic limit rather than by substituting a large value.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import integrate

from .estimators import KINDS, Kind, SpikeNormal, discrete_oracle_m, shrink
from .numerics import (DEFAULT_GRID_POINTS, DEFAULT_REFINE_TOL, RegParam, as_lambda,
                       gauss_hermite, minimize_scalar, std_normal_cdf as Phi,
                       std_normal_pdf as phi)

__all__ = [
    "SpikeNormal", "RiskCurve", "RiskSurface", "cw_risk", "cw_risk_ridge", "cw_risk_lasso",
    "cw_risk_pretest", "int_risk", "int_risk_quadrature", "ridge_oracle_lambda",
    "oracle_lambda", "compound_risk", "risk_decomposition", "risk_surface",
    "oracle_zeros_risk", "ridge_minimal_risk",
]


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def cw_risk_ridge(mu, sigma, lam):
    lam = as_lambda(lam)
    mu = np.asarray(mu, dtype=float)
    if math.isinf(lam):
        return _out(mu ** 2 + 0.0 * sigma)
    c = 1.0 / (1.0 + lam)
    return _out(c ** 2 * sigma ** 2 + (1.0 - c) ** 2 * mu ** 2)


def cw_risk_lasso(mu, sigma, lam):
    lam = as_lambda(lam)
    mu = np.asarray(mu, dtype=float)
    if math.isinf(lam):
        return _out(mu ** 2 + 0.0 * sigma)
    a = (-lam - mu) / sigma
    b = (lam - mu) / sigma
    r = ((1.0 + Phi(a) - Phi(b)) * (sigma ** 2 + lam ** 2)
         + (a * phi(b) + ((-lam + mu) / sigma) * phi(a)) * sigma ** 2
         + (Phi(b) - Phi(a)) * mu ** 2)
    # Far in the tails the terms cancel to within rounding, possibly below 0.
    return _out(np.maximum(r, 0.0))


def cw_risk_pretest(mu, sigma, lam):
    lam = as_lambda(lam)
    mu = np.asarray(mu, dtype=float)
    if math.isinf(lam):
        return _out(mu ** 2 + 0.0 * sigma)
    a = (-lam - mu) / sigma
    b = (lam - mu) / sigma
    r = ((1.0 + Phi(a) - Phi(b)) * sigma ** 2
         + (b * phi(b) - a * phi(a)) * sigma ** 2
         + (Phi(b) - Phi(a)) * mu ** 2)
    return _out(np.maximum(r, 0.0))


_CW = {Kind.RIDGE: cw_risk_ridge, Kind.LASSO: cw_risk_lasso, Kind.PRETEST: cw_risk_pretest}


def cw_risk(kind, mu, sigma, lam):
    """Componentwise risk E[(m(X, lambda) - mu)^2] for X ~ N(mu, sigma^2)."""
    return _CW[Kind.parse(kind)](mu, sigma, lam)


def _int_risk_lasso(d: SpikeNormal, lam: float) -> float:
    s, tau, m0 = d.sigma, d.tau, d.mu0
    r0 = 2.0 * Phi(-lam / s) * (s ** 2 + lam ** 2) - 2.0 * (lam / s) * phi(lam / s) * s ** 2
    a = (-lam - m0) / tau
    b = (lam - m0) / tau
    r1 = ((1.0 + Phi(a) - Phi(b)) * (s ** 2 + lam ** 2)
          + (Phi(b) - Phi(a)) * (m0 ** 2 + d.sigma0 ** 2)
          - phi(b) / tau * (lam + m0) * tau ** 2
          - phi(a) / tau * (lam - m0) * tau ** 2)
    return np.maximum(d.p * r0 + (1.0 - d.p) * r1, 0.0)


def _int_risk_pretest(d: SpikeNormal, lam: float) -> float:
    s, tau, m0, v0 = d.sigma, d.tau, d.mu0, d.sigma0 ** 2
    r0 = 2.0 * Phi(-lam / s) * s ** 2 + 2.0 * (lam / s) * phi(lam / s) * s ** 2
    a = (-lam - m0) / tau
    b = (lam - m0) / tau
    r1 = ((1.0 + Phi(a) - Phi(b)) * s ** 2
          + (Phi(b) - Phi(a)) * (m0 ** 2 + v0)
          - phi(b) / tau * (lam * (v0 - s ** 2) + m0 * tau ** 2)
          - phi(a) / tau * (lam * (v0 - s ** 2) - m0 * tau ** 2))
    return d.p * r0 + (1.0 - d.p) * r1


def int_risk(dgp: SpikeNormal, kind, lam) -> float:
    """Integrated risk under the spike-and-normal model, in closed form."""
    kind = Kind.parse(kind)
    lam = as_lambda(lam)
    if math.isinf(lam):
        return float(dgp.second_moment)
    if kind is Kind.RIDGE:
        c = 1.0 / (1.0 + lam)
        return float(c ** 2 * dgp.sigma ** 2 + (1.0 - c) ** 2 * dgp.second_moment)
    if kind is Kind.LASSO:
        return float(_int_risk_lasso(dgp, lam))
    return float(_int_risk_pretest(dgp, lam))


def int_risk_curve(dgp: SpikeNormal, kind, lams) -> np.ndarray:
    """Vectorized :func:`int_risk` over an array of lambda values."""
    kind = Kind.parse(kind)
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    out = np.full(lams.shape, float(dgp.second_moment))
    fin = np.isfinite(lams)
    l = lams[fin]
    if kind is Kind.RIDGE:
        c = 1.0 / (1.0 + l)
        out[fin] = c ** 2 * dgp.sigma ** 2 + (1.0 - c) ** 2 * dgp.second_moment
    elif kind is Kind.LASSO:
        out[fin] = _int_risk_lasso(dgp, l)
    else:
        out[fin] = _int_risk_pretest(dgp, l)
    return out


def int_risk_quadrature(dgp: SpikeNormal, kind, lam, nodes: int = 128) -> float:
    """Spike term plus a Gauss-Hermite average of componentwise risk over mu."""
    kind = Kind.parse(kind)
    lam = as_lambda(lam)
    spike = cw_risk(kind, 0.0, dgp.sigma, lam)
    if dgp.p >= 1.0:
        return float(spike)
    if dgp.sigma0 == 0.0:
        slab = cw_risk(kind, dgp.mu0, dgp.sigma, lam)
    else:
        x, w = gauss_hermite(nodes)
        mus = dgp.mu0 + math.sqrt(2.0) * dgp.sigma0 * x
        slab = float(np.dot(w, cw_risk(kind, mus, dgp.sigma, lam)) / math.sqrt(math.pi))
    return float(dgp.p * spike + (1.0 - dgp.p) * slab)


def ridge_oracle_lambda(dgp: SpikeNormal) -> RegParam:
    s = dgp.second_moment
    if s <= 0.0:
        return RegParam.from_lambda(math.inf)
    return RegParam.from_lambda(dgp.sigma ** 2 / s)


def ridge_minimal_risk(dgp: SpikeNormal) -> float:
    """sigma^2 s / (sigma^2 + s) with s = E[mu^2]."""
    s, v = dgp.second_moment, dgp.sigma ** 2
    return v * s / (v + s)


def oracle_lambda(dgp: SpikeNormal, kind, grid_points: int = DEFAULT_GRID_POINTS,
                  refine_tol: float = DEFAULT_REFINE_TOL) -> tuple[RegParam, float]:
    """lambda minimizing integrated risk over [0, inf], with the minimal risk."""
    kind = Kind.parse(kind)

    def curve(lams):
        return int_risk_curve(dgp, kind, lams)

    return minimize_scalar(curve, grid_points, refine_tol, vectorized=True)


def compound_risk(support, sigma: float, kind, lam) -> float:
    """Average componentwise risk over the fixed means in ``support``."""
    mus = np.asarray(support, dtype=float)
    return float(np.mean(cw_risk(kind, mus, sigma, lam)))


def risk_decomposition(support, sigma: float, kind, lam,
                           tol: float = 1e-8) -> tuple[float, float, float]:
    """Compound risk alongside its irreducible and L2-distance parts.

    The irreducible part is E[var(mu_I | X_I)] and the distance part is
    E[(m(X_I, lambda) - m*(X_I))^2], both under the equal-weight normal mixture
    induced by ``support``; they are computed by adaptive quadrature, so
    ``lhs - (v_star + l2_term)`` measures formula error.

    Raises:
        ArithmeticError: when quadrature misses the relative tolerance.
    """
    mus = np.asarray(support, dtype=float).ravel()
    lam_v = as_lambda(lam)
    lhs = compound_risk(mus, sigma, kind, lam_v)

    def density(x):
        return float(np.mean(phi((x - mus) / sigma)) / sigma)

    def post_moments(x):
        w = np.exp(-0.5 * ((x - mus) / sigma) ** 2 - np.max(-0.5 * ((x - mus) / sigma) ** 2))
        w /= w.sum()
        m1 = float(w @ mus)
        return m1, float(w @ (mus - m1) ** 2)

    def v_integrand(x):
        return density(x) * post_moments(x)[1]

    def l2_integrand(x):
        return density(x) * (shrink(kind, x, lam_v) - discrete_oracle_m(x, mus, sigma)) ** 2

    lo = float(mus.min() - 40.0 * sigma)
    hi = float(mus.max() + 40.0 * sigma)
    breaks = sorted({lo, hi, *mus.tolist(),
                     *([-lam_v, lam_v] if math.isfinite(lam_v) else [])})
    breaks = [b for b in breaks if lo <= b <= hi]

    def integrate_pieces(fn):
        total, err = 0.0, 0.0
        for a, b in zip(breaks[:-1], breaks[1:]):
            if b <= a:
                continue
            val, e = integrate.quad(fn, a, b, epsabs=1e-14, epsrel=1e-12, limit=400)
            total += val
            err += e
        if err > tol * max(abs(total), 1e-300) and err > 1e-12:
            raise ArithmeticError(f"quadrature error {err:g} exceeds tolerance for value {total:g}")
        return total

    v_star = integrate_pieces(v_integrand)
    l2 = integrate_pieces(l2_integrand)
    return lhs, v_star, l2


def oracle_zeros_risk(dgp: SpikeNormal) -> float:
    """Risk of hard thresholding with known zero locations: 1 - p (unit noise)."""
    if dgp.sigma != 1.0:
        raise ValueError("oracle-of-zeros risk is defined for unit noise variance")
    return 1.0 - dgp.p


@dataclass
class RiskCurve:
    """Criterion or risk values on a lambda grid, one column per label."""

    lams: np.ndarray
    values: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        self.lams = np.asarray(self.lams, dtype=float)
        self.values = np.asarray(self.values, dtype=float).reshape(len(self.lams), -1)
        if self.values.shape[1] != len(self.labels):
            raise ValueError("one label per value column is required")

    @property
    def ts(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            return np.where(np.isinf(self.lams), 1.0, self.lams / (1.0 + self.lams))

    def column(self, label: str) -> np.ndarray:
        return self.values[:, self.labels.index(label)]


@dataclass
class RiskSurface:
    rows: list[dict] = field(default_factory=list)

    COLUMNS = ("p", "mu0", "sigma0", "risk_ridge", "risk_lasso", "risk_pretest",
               "lambda_ridge", "lambda_lasso", "lambda_pretest", "best")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for row in self.rows:
                w.writerow([_fmt(row[c]) for c in self.COLUMNS])

    def best(self, p: float, mu0: float, sigma0: float) -> str:
        for row in self.rows:
            if (row["p"], row["mu0"], row["sigma0"]) == (p, mu0, sigma0):
                return row["best"]
        raise KeyError((p, mu0, sigma0))


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isinf(v):
        return "inf"
    return repr(v)


def risk_surface(dgp_grid: Iterable[SpikeNormal], grid_points: int = DEFAULT_GRID_POINTS) -> RiskSurface:
    """Oracle-minimal integrated risk per estimator for every cell of a grid.

    The ``best`` label takes the smallest risk, with exact ties resolved in
    the order ridge, lasso, pretest.
    """
    cells = list(dgp_grid)
    if not cells:
        raise ValueError("dgp grid is empty")
    surface = RiskSurface()
    for d in cells:
        row = {"p": d.p, "mu0": d.mu0, "sigma0": d.sigma0}
        risks = []
        for kind in KINDS:
            lam, r = oracle_lambda(d, kind, grid_points)
            row[f"risk_{kind.value}"] = r
            row[f"lambda_{kind.value}"] = lam.lam
            risks.append(r)
        row["best"] = KINDS[int(np.argmin(risks))].value
        surface.rows.append(row)
    return surface


def spike_normal_grid(ps: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 0.95),
                      mu0s: Sequence[float] = (0.0, 2.0, 4.0),
                      sigma0s: Sequence[float] = (2.0, 4.0, 6.0),
                      sigma: float = 1.0) -> list[SpikeNormal]:
    return [SpikeNormal(p, m, s, sigma) for p in ps for m in mu0s for s in sigma0s]
