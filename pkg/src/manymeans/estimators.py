"""Componentwise estimating functions m(x, lambda) and posterior-mean shrinkage."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

import numpy as np
from scipy.special import logsumexp

from .numerics import RegParam, as_lambda


class Kind(str, Enum):
    RIDGE = "ridge"
    LASSO = "lasso"
    PRETEST = "pretest"

    @classmethod
    def parse(cls, value: Union[str, "Kind"]) -> "Kind":
        if isinstance(value, Kind):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown estimator kind {value!r}; expected ridge, lasso or pretest") from None


KINDS = (Kind.RIDGE, Kind.LASSO, Kind.PRETEST)


@dataclass(frozen=True)
class SpikeNormal:
    """mu = 0 with probability p, else N(mu0, sigma0^2); X | mu ~ N(mu, sigma^2)."""

    p: float
    mu0: float
    sigma0: float
    sigma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if not self.sigma0 >= 0.0:
            raise ValueError(f"sigma0 must be non-negative, got {self.sigma0}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    @property
    def tau(self) -> float:
        """Marginal sd of X given the non-zero component."""
        return math.hypot(self.sigma0, self.sigma)

    @property
    def second_moment(self) -> float:
        """E[mu^2]."""
        return (1.0 - self.p) * (self.mu0 ** 2 + self.sigma0 ** 2)

    def marginal_pdf(self, x):
        x = np.asarray(x, dtype=float)
        s, tau = self.sigma, self.tau
        out = self.p * _npdf(x / s) / s + (1.0 - self.p) * _npdf((x - self.mu0) / tau) / tau
        return float(out) if out.ndim == 0 else out

    def marginal_log_gradient(self, x):
        """d/dx log f(x) for the marginal density of X, computed analytically."""
        x = np.asarray(x, dtype=float)
        la, lb = self._component_logs(x)
        w_normal = np.exp(la - np.logaddexp(la, lb))
        s2, t2 = self.sigma ** 2, self.tau ** 2
        out = w_normal * (-(x - self.mu0) / t2) + (1.0 - w_normal) * (-x / s2)
        return float(out) if out.ndim == 0 else out

    def _component_logs(self, x):
        s, tau = self.sigma, self.tau
        with np.errstate(divide="ignore"):
            log_spike = np.log(self.p) - 0.5 * (x / s) ** 2 - math.log(s)
            log_normal = np.log1p(-self.p) - 0.5 * ((x - self.mu0) / tau) ** 2 - math.log(tau)
        return log_normal, log_spike


def _npdf(z):
    return np.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)


def ridge_m(x, lam):
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x) if math.isinf(lam) else x / (1.0 + lam)
    return float(out) if out.ndim == 0 else out


def lasso_m(x, lam):
    """Soft thresholding; exactly 0 when |x| <= lambda."""
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=float)
    out = np.where(x > lam, x - lam, 0.0) + np.where(x < -lam, x + lam, 0.0)
    return float(out) if out.ndim == 0 else out


def pretest_m(x, lam):
    """Hard thresholding; |x| == lambda maps to 0."""
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) > lam, x, 0.0)
    return float(out) if out.ndim == 0 else out


_RULES = {Kind.RIDGE: ridge_m, Kind.LASSO: lasso_m, Kind.PRETEST: pretest_m}


def shrink(kind, x, lam):
    """Apply the named estimating function."""
    return _RULES[Kind.parse(kind)](x, lam)


def shrink_grid(kind, x: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """m(x_i, lambda_j) as a (len(lams), len(x)) matrix; lams may contain inf."""
    kind = Kind.parse(kind)
    x = np.asarray(x, dtype=float)[None, :]
    lams = np.asarray(lams, dtype=float)[:, None]
    if kind is Kind.RIDGE:
        with np.errstate(invalid="ignore"):
            out = x / (1.0 + lams)
        return np.where(np.isinf(lams), 0.0, out)
    if kind is Kind.LASSO:
        return np.sign(x) * np.maximum(np.abs(x) - lams, 0.0)
    return np.where(np.abs(x) > lams, x, 0.0)


class MseCurve:
    """lambda -> (1/n) sum_i (m(y_i, lambda) - z_i)^2 with the sorting done once.

    Sorted |y| with prefix and suffix sums make each evaluation O(log n), so
    repeated calls from a golden-section search stay cheap.
    """

    def __init__(self, kind, y, z):
        self.kind = Kind.parse(kind)
        y = np.asarray(y, dtype=float).ravel()
        z = np.asarray(z, dtype=float).ravel()
        if y.shape != z.shape:
            raise ValueError("y and z must have the same length")
        self.n = y.size
        self.zz = float(z @ z)
        if self.kind is Kind.RIDGE:
            self.yy, self.yz = float(y @ y), float(y @ z)
            return
        order = np.argsort(np.abs(y), kind="stable")
        ys, zs = y[order], z[order]
        self.abs_sorted = np.abs(ys)
        d = ys - zs
        self.z2_prefix = np.concatenate([[0.0], np.cumsum(zs ** 2)])
        # Past max|y| the finite-lambda value must tie exactly with lambda = inf.
        self.zz = float(self.z2_prefix[-1])
        self.d2_suffix = _suffix_sums(d * d)
        self.sd_suffix = _suffix_sums(np.sign(ys) * d)

    def __call__(self, lams) -> np.ndarray:
        lams = np.atleast_1d(np.asarray(lams, dtype=float))
        n = self.n
        out = np.full(lams.shape, self.zz / n)
        fin = np.isfinite(lams)
        lf = lams[fin]
        if self.kind is Kind.RIDGE:
            c = 1.0 / (1.0 + lf)
            out[fin] = (c * c * self.yy - 2.0 * c * self.yz + self.zz) / n
            return out
        n_in = np.searchsorted(self.abs_sorted, lf, side="right")
        base = self.z2_prefix[n_in] + self.d2_suffix[n_in]
        if self.kind is Kind.PRETEST:
            out[fin] = base / n
            return out
        out[fin] = (base - 2.0 * lf * self.sd_suffix[n_in] + lf * lf * (n - n_in)) / n
        return out


def _suffix_sums(v):
    return np.concatenate([np.cumsum(v[::-1])[::-1], [0.0]])


def mse_curve(kind, y, z, lams) -> np.ndarray:
    """(1/n) sum_i (m(y_i, lambda) - z_i)^2 for every lambda in ``lams``."""
    return MseCurve(kind, y, z)(lams)


def _posterior_mean_atoms(x, support, log_weights, sigma):
    """Posterior mean over a discrete prior with N(., sigma^2) noise, in log-space."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xs = np.atleast_1d(x)[:, None]
    logits = log_weights[None, :] - 0.5 * ((xs - support[None, :]) / sigma) ** 2
    out = np.empty(xs.shape[0])
    finite = np.isfinite(logits).any(axis=1)
    if finite.any():
        lw = logits[finite]
        post = np.exp(lw - logsumexp(lw, axis=1, keepdims=True))
        out[finite] = post @ support
    if not finite.all():
        # Saturation: no atom carries representable weight, use the nearest one.
        near = np.abs(xs[~finite] - support[None, :]).argmin(axis=1)
        out[~finite] = support[near]
    # Rounding can push the weighted average a hair outside the hull.
    out = np.clip(out, support.min(), support.max())
    return float(out[0]) if scalar else out


def discrete_oracle_m(x, support, sigma: float = 1.0):
    """Posterior mean of mu_I given X_I = x when mu_I is uniform on ``support``."""
    support = np.asarray(support, dtype=float).ravel()
    if support.size == 0 or not np.isfinite(support).all():
        raise ValueError("support must be a non-empty vector of finite values")
    return _posterior_mean_atoms(x, support, np.zeros(support.size), sigma)


def spike_normal_optimal_m(x, dgp: SpikeNormal):
    """Posterior mean of mu given X = x under a spike-and-normal prior.

    Evaluated as the mixture-weighted conjugate posterior mean with the mixture
    weight formed in log-space, so it does not underflow for large |x|.
    sigma0 = 0 gives a two-atom prior.
    """
    x = np.asarray(x, dtype=float)
    if dgp.p >= 1.0:
        out = np.zeros_like(x)
        return float(out) if out.ndim == 0 else out
    s2, v0 = dgp.sigma ** 2, dgp.sigma0 ** 2
    normal_post = (dgp.mu0 * s2 + x * v0) / (v0 + s2)
    la, lb = dgp._component_logs(x)
    w_normal = np.exp(la - np.logaddexp(la, lb))
    out = w_normal * normal_post
    return float(out) if out.ndim == 0 else out


def tweedie_m(x, log_density_gradient: Callable, noise_var: float = 1.0):
    """x + noise_var * d/dx log f(x)."""
    x = np.asarray(x, dtype=float)
    out = x + noise_var * np.asarray(log_density_gradient(x), dtype=float)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ShrinkageRule:
    """An estimating function together with whatever it needs to be evaluated.

    ``kind`` is one of ``ridge``, ``lasso``, ``pretest`` (which use ``lam``),
    ``spike_normal`` (``dgp``), ``discrete_oracle`` (``support``) or ``npeb``
    (``mixture``, a fitted :class:`~manymeans.npeb.DiscreteMixture`).
    """

    kind: str
    lam: RegParam = field(default_factory=lambda: RegParam.from_lambda(0.0))
    dgp: SpikeNormal | None = None
    support: tuple | None = None
    mixture: object | None = None

    def __call__(self, xs):
        return apply_rule(self, xs)


def apply_rule(rule: ShrinkageRule, xs):
    xs = np.asarray(xs, dtype=float)
    kind = rule.kind.lower()
    if kind in ("ridge", "lasso", "pretest"):
        return shrink(kind, xs, rule.lam)
    if kind == "spike_normal":
        return spike_normal_optimal_m(xs, rule.dgp)
    if kind == "discrete_oracle":
        return discrete_oracle_m(xs, rule.support)
    if kind == "npeb":
        from .npeb import npeb_m
        return npeb_m(rule.mixture, xs)
    raise ValueError(f"unknown shrinkage rule kind {rule.kind!r}")
