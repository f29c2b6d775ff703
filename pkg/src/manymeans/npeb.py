"""Nonparametric empirical Bayes: a grid prior fitted by EM, then its posterior mean."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .estimators import _posterior_mean_atoms

GRID_SIZE = 300
GRID_PAD = 1.0
MAX_ITER = 2000
TOL = 1e-8
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class DiscreteMixture:
    support: np.ndarray
    weights: np.ndarray
    loglik: float
    history: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    converged: bool = True

    def __post_init__(self):
        s = np.asarray(self.support, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if s.shape != w.shape or s.ndim != 1 or s.size == 0:
            raise ValueError("support and weights must be equal-length vectors")
        if s.size > 1 and not np.all(np.diff(s) > 0):
            raise ValueError("support must be strictly increasing")
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must lie on the probability simplex")
        object.__setattr__(self, "support", s)
        object.__setattr__(self, "weights", w)

    def marginal_pdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = x[:, None] - self.support[None, :]
        return np.exp(-0.5 * z * z - _LOG_SQRT_2PI) @ self.weights

    def log_gradient(self, x):
        """f'(x) / f(x) for the fitted marginal f(x) = sum_j w_j phi(x - u_j).

        Both sums share one exp scaling so the ratio survives where f underflows.
        """
        x = np.asarray(x, dtype=float)
        xs = np.atleast_1d(x)
        z = xs[:, None] - self.support[None, :]
        with np.errstate(divide="ignore"):
            expo = np.log(self.weights)[None, :] - 0.5 * z * z
        scaled = np.exp(expo - expo.max(axis=1, keepdims=True))
        out = -(scaled * z).sum(axis=1) / scaled.sum(axis=1)
        return float(out[0]) if x.ndim == 0 else out


def fit_em(sample, grid_size: int = GRID_SIZE, max_iter: int = MAX_ITER, tol: float = TOL,
           pad: float = GRID_PAD) -> DiscreteMixture:
    """Fit prior weights on a fixed grid by EM, with unit-variance normal noise.

    The grid is equispaced on [min X - pad, max X + pad] and the weights start
    uniform. Iteration stops when the relative change in log-likelihood falls
    below ``tol`` or after ``max_iter`` updates.

    Raises:
        ArithmeticError: if an update lowers the log-likelihood.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size == 0 or not np.isfinite(x).all():
        raise ValueError("EM needs a non-empty finite sample")
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    support = np.linspace(x.min() - pad, x.max() + pad, int(grid_size))

    # Row-scaled likelihood: lik[i, j] = phi(x_i - u_j) * exp(-offset_i).
    logk = -0.5 * (x[:, None] - support[None, :]) ** 2
    offset = logk.max(axis=1)
    lik = np.exp(logk - offset[:, None])
    const = float(offset.sum()) - x.size * _LOG_SQRT_2PI

    w = np.full(support.size, 1.0 / support.size)
    mix = lik @ w
    ll = float(np.log(mix).sum()) + const
    history = [ll]
    converged = False
    for _ in range(max_iter):
        w = w * (lik.T @ (1.0 / mix)) / x.size
        w /= w.sum()
        mix = lik @ w
        new_ll = float(np.log(mix).sum()) + const
        if new_ll < ll - 1e-9 * max(1.0, abs(ll)):
            raise ArithmeticError(f"EM log-likelihood decreased from {ll} to {new_ll}")
        history.append(new_ll)
        change = abs(new_ll - ll) / max(abs(ll), 1e-300)
        ll = new_ll
        if change < tol:
            converged = True
            break
    return DiscreteMixture(support, w, ll, np.asarray(history), converged)


def npeb_m(mix: DiscreteMixture, x):
    """Posterior mean sum_j u_j w_j phi(x - u_j) / sum_j w_j phi(x - u_j)."""
    with np.errstate(divide="ignore"):
        logw = np.log(mix.weights)
    return _posterior_mean_atoms(x, mix.support, logw, 1.0)


def shrinkage_grid(mix: DiscreteMixture, points: int = 512) -> tuple[np.ndarray, np.ndarray]:
    xs = np.linspace(mix.support[0], mix.support[-1], points)
    return xs, np.asarray(npeb_m(mix, xs))
