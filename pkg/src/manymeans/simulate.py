"""Seeded spike-and-normal simulations and the many-cell risk study."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .cv import CvCriterion, PanelSample, select_cv
from .estimators import SpikeNormal, shrink, spike_normal_optimal_m
from .npeb import GRID_SIZE, fit_em, npeb_m
from .numerics import DEFAULT_GRID_POINTS, SeedSpec
from .sure import SureCriterion, select_sure


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, SeedSpec):
        return seed.rng()
    return SeedSpec(int(seed)).rng()


def draw_means(dgp: SpikeNormal, n: int, seed) -> np.ndarray:
    """mu_i = 0 with probability p, otherwise N(mu0, sigma0^2)."""
    rng = _rng(seed)
    zero = rng.random(n) < dgp.p
    slab = dgp.mu0 + dgp.sigma0 * rng.standard_normal(n)
    return np.where(zero, 0.0, slab)


def draw_sample(mu, seed, sigma: float = 1.0) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    return mu + sigma * _rng(seed).standard_normal(mu.shape)


def draw_panel(mu, k: int, seed, sigma: float = 1.0) -> PanelSample:
    """x_ji = mu_i + sqrt(k) sigma u_ji, so the k-replicate means have noise sd sigma."""
    mu = np.asarray(mu, dtype=float)
    u = _rng(seed).standard_normal((mu.size, k))
    return PanelSample(mu[:, None] + math.sqrt(k) * sigma * u)


def compound_loss(estimates, mu) -> float:
    est = np.asarray(estimates, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if est.shape != mu.shape:
        raise ValueError(f"length mismatch: {est.shape} vs {mu.shape}")
    return float(np.mean((est - mu) ** 2))


def simulate_optimal_risk(dgp: SpikeNormal, draws: int = 1_000_000, seed=0) -> tuple[float, float]:
    """Monte Carlo risk of the spike-and-normal posterior mean; returns (mean, se)."""
    rng = _rng(seed)
    mu = draw_means(dgp, draws, rng)
    x = draw_sample(mu, rng, dgp.sigma)
    sq = (spike_normal_optimal_m(x, dgp) - mu) ** 2
    return float(sq.mean()), float(sq.std(ddof=1) / math.sqrt(draws))


@dataclass
class SimConfig:
    ps: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 0.95)
    mu0s: Sequence[float] = (0.0, 2.0, 4.0)
    sigma0s: Sequence[float] = (2.0, 4.0, 6.0)
    ns: Sequence[int] = (50, 200, 1000)
    reps: int = 200
    ks: Sequence[int] = (4, 20)
    estimators: Sequence[str] = ("ridge", "lasso", "pretest", "npeb")
    selectors: Sequence[str] = ("sure", "cv")
    include_optimal: bool = False
    seed: int = 20240101
    grid_points: int = DEFAULT_GRID_POINTS
    npeb_grid: int = GRID_SIZE
    workers: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        for name in ("ps", "mu0s", "sigma0s", "ns"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"{name} must be non-empty")
        if "cv" in self.selectors and not self.ks:
            raise ValueError("ks must be non-empty when the cv selector is used")
        for e in self.estimators:
            if e not in ("ridge", "lasso", "pretest", "npeb"):
                raise ValueError(f"unknown estimator {e!r}")
        for s in self.selectors:
            if s not in ("sure", "cv"):
                raise ValueError(f"unknown selector {s!r}")
        for k in self.ks:
            if int(k) < 2:
                raise ValueError("panel replicates k must be >= 2")

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        raw = json.loads(text)
        if not isinstance(raw, dict):
            raise ValueError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def to_json(self) -> str:
        return json.dumps({k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()},
                          indent=2, sort_keys=True)

    def cells(self) -> list[tuple[SpikeNormal, int]]:
        return [(SpikeNormal(p, m, s), int(n))
                for n in self.ns for p in self.ps for m in self.mu0s for s in self.sigma0s]

    def methods(self) -> list[tuple[str, str]]:
        """(estimator, selector) pairs in output order."""
        out = []
        for e in self.estimators:
            if e == "npeb":
                out.append(("npeb", "em"))
                continue
            if "sure" in self.selectors:
                out.append((e, "sure"))
            if "cv" in self.selectors:
                out.extend((e, f"cv_loo_k{k}") for k in self.ks)
        if self.include_optimal:
            out.append(("optimal", "oracle"))
        return out


def stream_id(dgp: SpikeNormal, n: int, rep: int) -> int:
    """64-bit stream id keyed on the cell's parameter values and the replication."""
    key = f"{dgp.p!r}|{dgp.mu0!r}|{dgp.sigma0!r}|{n}|{rep}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def run_replication(cfg: SimConfig, dgp: SpikeNormal, n: int, rep: int) -> dict:
    """Losses and selected lambdas of every configured method on one draw."""
    rng = SeedSpec(cfg.seed, stream_id(dgp, n, rep)).rng()
    mu = draw_means(dgp, n, rng)
    x = draw_sample(mu, rng)
    methods = cfg.methods()
    panels = {}
    if any(sel.startswith("cv_") for _, sel in methods):
        panels = {int(k): draw_panel(mu, int(k), rng) for k in cfg.ks}
    out = {}
    for est, sel in methods:
        if est == "npeb":
            mix = fit_em(x, grid_size=cfg.npeb_grid)
            out[(est, sel)] = (compound_loss(npeb_m(mix, x), mu), math.nan)
        elif est == "optimal":
            out[(est, sel)] = (compound_loss(spike_normal_optimal_m(x, dgp), mu), math.nan)
        elif sel == "sure":
            s = select_sure(SureCriterion(est, x), cfg.grid_points, warn=False)
            out[(est, sel)] = (compound_loss(shrink(est, x, s.lam), mu), s.lam.lam)
        else:
            k = int(sel.rsplit("k", 1)[1])
            c = select_cv(panels[k], est, CvCriterion.LEAVE_ONE_OUT, grid_points=cfg.grid_points)
            out[(est, sel)] = (compound_loss(c.estimates, mu), c.lam.lam)
    return out


def _run_cell(args) -> tuple[list[dict], dict]:
    cfg, dgp, n = args
    methods = cfg.methods()
    losses = {m: np.empty(cfg.reps) for m in methods}
    lams = {m: np.empty(cfg.reps) for m in methods}
    for r in range(cfg.reps):
        res = run_replication(cfg, dgp, n, r)
        for m in methods:
            losses[m][r], lams[m][r] = res[m]
    rows = []
    for est, sel in methods:
        l = losses[(est, sel)]
        se = float(l.std(ddof=1) / math.sqrt(cfg.reps)) if cfg.reps > 1 else math.nan
        lam_vals = lams[(est, sel)]
        mean_lam = math.nan if np.isnan(lam_vals).all() else float(np.mean(lam_vals))
        rows.append(dict(p=dgp.p, mu0=dgp.mu0, sigma0=dgp.sigma0, n=n, estimator=est,
                         selector=sel, mean_loss=float(l.mean()), se=se, mean_lambda=mean_lam))
    keyed = {(dgp.p, dgp.mu0, dgp.sigma0, n, est, sel): losses[(est, sel)] for est, sel in methods}
    return rows, keyed


@dataclass
class SimResult:
    rows: list[dict] = field(default_factory=list)
    # Per-replication losses keyed like get(); methods share draws, so paired
    # differences of these arrays give the SE of a loss difference.
    losses: dict = field(default_factory=dict, repr=False)

    COLUMNS = ("p", "mu0", "sigma0", "n", "estimator", "selector", "mean_loss", "se", "mean_lambda")

    def get(self, p, mu0, sigma0, n, estimator, selector="sure") -> dict:
        for r in self.rows:
            if (r["p"], r["mu0"], r["sigma0"], r["n"], r["estimator"], r["selector"]) == \
                    (p, mu0, sigma0, n, estimator, selector):
                return r
        raise KeyError((p, mu0, sigma0, n, estimator, selector))

    def paired_difference(self, p, mu0, sigma0, n, a, b) -> tuple[float, float]:
        """(mean, SE) of loss(a) - loss(b); a and b are (estimator, selector) pairs."""
        la = self.losses[(p, mu0, sigma0, n, *a)]
        d = la - self.losses[(p, mu0, sigma0, n, *b)]
        se = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else math.nan
        return float(d.mean()), se

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in self.COLUMNS])


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf"
    return repr(v)


def run_study(cfg: SimConfig) -> SimResult:
    """Run every (cell, replication), aggregating mean compound loss and its SE.

    Each replication draws from its own stream, so the output does not depend
    on ``cfg.workers`` or on which other cells are in the grid.
    """
    tasks = [(cfg, d, n) for d, n in cfg.cells()]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            chunks = list(pool.map(_run_cell, tasks))
    else:
        chunks = [_run_cell(t) for t in tasks]
    rows, losses = [], {}
    for chunk_rows, chunk_losses in chunks:
        rows.extend(chunk_rows)
        losses.update(chunk_losses)
    return SimResult(rows, losses)
