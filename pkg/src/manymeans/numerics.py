"""Scalar special functions, quadrature, seeding and the 1-D search over [0, inf]."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.special import erfc

SQRT_2PI = math.sqrt(2.0 * math.pi)
_INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

DEFAULT_GRID_POINTS = 1001
DEFAULT_REFINE_TOL = 1e-6


class EvaluationError(ArithmeticError):
    """Raised when an objective returns a non-finite value during a search."""

    def __init__(self, t: float, value: float):
        super().__init__(f"objective is not finite at t={t!r} (value {value!r})")
        self.t = t
        self.value = value


@dataclass(frozen=True)
class RegParam:
    """Regularization parameter lambda in [0, inf], kept with t = lambda / (1 + lambda).

    ``t == 1`` represents lambda = inf exactly. Build instances with
    :meth:`from_lambda` or :meth:`from_t`; both coordinates are stored so the
    constructor's input is returned without rounding.
    """

    t: float
    lam: float

    def __post_init__(self):
        if not (0.0 <= self.t <= 1.0):
            raise ValueError(f"t must lie in [0, 1], got {self.t}")
        if not (self.lam >= 0.0):
            raise ValueError(f"lambda must be non-negative, got {self.lam}")

    @classmethod
    def from_lambda(cls, lam: float) -> "RegParam":
        lam = float(lam)
        if lam < 0 or math.isnan(lam):
            raise ValueError(f"lambda must be non-negative, got {lam}")
        return cls(t=lambda_to_t(lam), lam=lam)

    @classmethod
    def from_t(cls, t: float) -> "RegParam":
        t = float(t)
        if not (0.0 <= t <= 1.0):
            raise ValueError(f"t must lie in [0, 1], got {t}")
        return cls(t=t, lam=t_to_lambda(t))

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.lam)

    def __float__(self) -> float:
        return self.lam


def lambda_to_t(lam):
    """Map lambda in [0, inf] to t in [0, 1]; vectorized, inf maps to 1."""
    lam = np.asarray(lam, dtype=float)
    with np.errstate(invalid="ignore"):
        t = np.where(np.isinf(lam), 1.0, lam / (1.0 + lam))
    return float(t) if t.ndim == 0 else t


def t_to_lambda(t):
    """Inverse of :func:`lambda_to_t`; t = 1 maps to inf."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(t >= 1.0, np.inf, t / (1.0 - t))
    return float(lam) if lam.ndim == 0 else lam


def as_lambda(lam) -> float:
    """Accept a RegParam or a plain number (``'inf'`` allowed)."""
    if isinstance(lam, RegParam):
        return lam.lam
    value = float(lam)
    if value < 0 or math.isnan(value):
        raise ValueError(f"lambda must be non-negative, got {lam!r}")
    return value


def std_normal_pdf(x):
    x = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * x * x) / SQRT_2PI
    return float(out) if out.ndim == 0 else out


def std_normal_cdf(x):
    """Phi(x) through the complementary error function; accurate in both tails."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * erfc(-x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def gauss_hermite(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite rule for the weight exp(-x^2); weights sum to sqrt(pi)."""
    if not 1 <= int(nodes) <= 256:
        raise ValueError(f"nodes must be in [1, 256], got {nodes}")
    x, w = _hermite_rule(int(nodes))
    return x.copy(), w.copy()


@functools.lru_cache(maxsize=None)
def _hermite_rule(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = hermgauss(nodes)
    # Enforce exact symmetry; hermgauss is symmetric only to rounding.
    return 0.5 * (x - x[::-1]), 0.5 * (w + w[::-1])


def normal_expectation(g: Callable[[np.ndarray], np.ndarray], mean: float, sd: float,
                       nodes: int = 128) -> float:
    """E[g(Z)] for Z ~ N(mean, sd^2) by Gauss-Hermite; g must be vectorized."""
    if sd == 0:
        return float(np.asarray(g(np.array([mean], dtype=float)))[0])
    x, w = gauss_hermite(nodes)
    values = np.asarray(g(mean + math.sqrt(2.0) * sd * x), dtype=float)
    return float(np.dot(w, values) / math.sqrt(math.pi))


def golden_section(f: Callable[[float], float], lo: float, hi: float,
                   tol: float = DEFAULT_REFINE_TOL, max_iter: int = 200) -> tuple[float, float]:
    """Golden-section search for a minimum of f on [lo, hi]; returns (x, f(x))."""
    a, b = lo, hi
    c = b - _INV_GOLDEN * (b - a)
    d = a + _INV_GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INV_GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def minimize_scalar(f: Callable, grid_points: int = DEFAULT_GRID_POINTS,
                    refine_tol: float = DEFAULT_REFINE_TOL, *,
                    vectorized: bool = False) -> tuple[RegParam, float]:
    """Minimize f over lambda in [0, inf] using the compact coordinate t.

    f is evaluated on a uniform t-grid that includes both endpoints; the best
    grid point is then refined by golden-section search inside its bracketing
    neighbours. Ties go to the smaller t. With ``vectorized=True`` f receives an
    ndarray of lambda values (inf included) and must return an array of the
    same shape; otherwise f is called with one RegParam at a time.

    Returns:
        (RegParam, value) at the minimum.
    """
    if grid_points < 3:
        raise ValueError("grid_points must be at least 3")
    ts = np.linspace(0.0, 1.0, int(grid_points))
    values = evaluate_grid(f, ts, vectorized=vectorized)

    best = int(np.argmin(values))
    best_t, best_val = float(ts[best]), float(values[best])

    lo = ts[max(best - 1, 0)]
    hi = ts[min(best + 1, len(ts) - 1)]

    def f_of_t(t: float) -> float:
        v = _call_scalar(f, t, vectorized)
        if not math.isfinite(v):
            raise EvaluationError(t, v)
        return v

    t_ref, v_ref = golden_section(f_of_t, float(lo), float(hi), tol=refine_tol)
    if v_ref < best_val or (v_ref == best_val and t_ref < best_t):
        best_t, best_val = t_ref, v_ref
    return RegParam.from_t(best_t), best_val


def evaluate_grid(f: Callable, ts: np.ndarray, *, vectorized: bool = False) -> np.ndarray:
    """Evaluate f at each t (as lambda); raise EvaluationError on non-finite output."""
    if vectorized:
        values = np.asarray(f(t_to_lambda(ts)), dtype=float).reshape(ts.shape)
    else:
        values = np.array([_call_scalar(f, t, False) for t in ts], dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise EvaluationError(float(ts[i]), float(values[i]))
    return values


def _call_scalar(f: Callable, t: float, vectorized: bool) -> float:
    if vectorized:
        return float(np.asarray(f(np.array([t_to_lambda(t)])), dtype=float)[0])
    return float(f(RegParam.from_t(t)))


@dataclass(frozen=True)
class SeedSpec:
    """(master seed, stream id) pair; each pair names one independent RNG stream."""

    master_seed: int
    stream_id: int = 0

    def __post_init__(self):
        for name in ("master_seed", "stream_id"):
            v = getattr(self, name)
            if not 0 <= int(v) < 2**64:
                raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")

    def child(self, *keys: int) -> "SeedSpec":
        """Derive a stream id from integer keys (e.g. cell and replication index)."""
        ss = np.random.SeedSequence(self.stream_id, spawn_key=tuple(int(k) for k in keys))
        return SeedSpec(self.master_seed, int(ss.generate_state(1, dtype=np.uint64)[0]))

    def rng(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))
