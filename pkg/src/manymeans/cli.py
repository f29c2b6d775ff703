"""Command-line entry point: ``manymeans {shrink,cv,npeb,surface,simulate}``.

Every subcommand writes tidy CSV files into the ``--output`` directory.
Exit codes: 0 success, 2 input error, 3 selector incompatible with the input,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cv import CvCriterion, select_cv
from .density import BandwidthRule, KernelDensity
from .estimators import KINDS, Kind, shrink
from .ingest import (InputError, destudentize, orthogonalize, read_estimates, read_header,
                     read_panel, read_regression, studentize)
from .npeb import GRID_SIZE, fit_em, npeb_m, shrinkage_grid
from .numerics import DEFAULT_GRID_POINTS, EvaluationError, RegParam, lambda_to_t
from .risk import risk_surface, spike_normal_grid
from .simulate import SimConfig, run_study
from .sure import SureCriterion, select_sure, sure_curves_table, sure_value

log = logging.getLogger("manymeans")

EXIT_OK, EXIT_INPUT, EXIT_MISMATCH, EXIT_NUMERIC = 0, 2, 3, 4


class SelectorMismatch(Exception):
    pass


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _parse_lambda(text: str | None) -> RegParam | None:
    if text is None:
        return None
    try:
        return RegParam.from_lambda(float(text))
    except ValueError:
        raise InputError(f"--lambda must be a non-negative number or 'inf', got {text!r}") from None


def _parse_estimators(text: str, allow_npeb: bool = True) -> list[str]:
    names = [s.strip().lower() for s in text.split(",") if s.strip()]
    valid = {"ridge", "lasso", "pretest"} | ({"npeb"} if allow_npeb else set())
    bad = [s for s in names if s not in valid]
    if bad or not names:
        raise InputError(f"unknown estimators {bad}; choose from {sorted(valid)}")
    return names


def _outdir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise InputError(f"cannot create output directory {out}: {e}") from e
    return out


def _load_shrink_input(args):
    """Return (ids, x, scale, regression extras or None)."""
    header = read_header(args.input)
    if header and header[0] == "y":
        names, W, Y = read_regression(args.input)
        ortho = orthogonalize(W, Y)
        if not (ortho.noise_scale > 0):
            raise InputError("regression needs N > n and a non-zero residual to studentize")
        keep = [i for i, n in enumerate(names) if n not in set(args.exclude_ids)]
        scale = np.full(len(keep), ortho.noise_scale)
        return [names[i] for i in keep], ortho.x[keep] / ortho.noise_scale, scale, (ortho, keep)
    raw = read_estimates(args.input)
    if args.exclude_ids:
        raw = raw.exclude(args.exclude_ids)
        if not raw.ids:
            raise InputError("every id was excluded")
    x, scale = studentize(raw)
    return list(raw.ids), x, scale, None


def cmd_shrink(args) -> int:
    if args.selector.startswith("cv"):
        raise SelectorMismatch("cross-validation selectors need panel input; use the 'cv' subcommand")
    estimators = _parse_estimators(args.estimators)
    fixed = _parse_lambda(args.lam)
    if args.selector == "fixed" and fixed is None:
        raise InputError("--selector fixed requires --lambda")
    ids, x, scale, regression = _load_shrink_input(args)
    out = _outdir(args.output)

    kinds = [Kind(e) for e in estimators if e != "npeb"]
    summary, columns = [], {}
    for kind in kinds:
        crit = SureCriterion(kind, x)
        if args.selector == "fixed":
            lam, value = fixed, sure_value(crit, fixed)
        else:
            sel = select_sure(crit, args.grid)
            lam, value = sel.lam, sel.value
        columns[kind.value] = np.asarray(shrink(kind, x, lam))
        summary.append([kind.value, args.selector, lam.lam, lam.t, value])
    if "npeb" in estimators:
        mix = fit_em(x, grid_size=args.npeb_grid)
        columns["npeb"] = np.asarray(npeb_m(mix, x))
        summary.append(["npeb", "em", math.nan, math.nan, math.nan])

    best = ""
    if kinds:
        crits = [row[4] for row in summary[:len(kinds)]]
        best = kinds[int(np.argmin(crits))].value
    write_csv(out / "summary.csv", ["estimator", "selector", "lambda", "t", "criterion", "best"],
              [row + [str(row[0] == best).lower()] for row in summary])

    names = list(columns)
    header = ["id", "x", "scale"] + names + [f"{n}_original" for n in names]
    cols = [columns[n] for n in names] + [destudentize(columns[n], scale) for n in names]
    if regression is not None:
        ortho, keep = regression
        header += [f"{n}_beta" for n in names]
        for n in names:
            mu_hat = np.zeros(ortho.x.size)
            mu_hat[keep] = destudentize(columns[n], scale)
            cols.append((ortho.omega_inv_sqrt @ mu_hat)[keep])
    write_csv(out / "estimates.csv", header,
              ([ids[i], x[i], scale[i]] + [c[i] for c in cols] for i in range(len(ids))))

    if kinds:
        curve = sure_curves_table(x, kinds, args.grid)
        write_csv(out / "sure_curve.csv", ["lambda", "t", *curve.labels],
                  ([curve.lams[i], curve.ts[i], *curve.values[i]] for i in range(len(curve.lams))))
    if x.size >= 2 and np.std(x) > 0:
        xs, fx = KernelDensity.fit(x, BandwidthRule.NORMAL_REFERENCE).grid(512)
        write_csv(out / "density.csv", ["x", "density"], zip(xs, fx))
    print(f"best={best}" if best else "done")
    return EXIT_OK


def cmd_cv(args) -> int:
    if args.selector not in ("cv-loo", "cv-holdout"):
        raise SelectorMismatch("the cv subcommand needs --selector cv-loo or cv-holdout")
    estimators = _parse_estimators(args.estimators, allow_npeb=False)
    ids, panel = read_panel(args.input)
    out = _outdir(args.output)
    criterion = CvCriterion.LEAVE_ONE_OUT if args.selector == "cv-loo" else CvCriterion.HOLDOUT
    summary, est_cols, curves = [], {}, {}
    for name in estimators:
        sel = select_cv(panel, name, criterion, final=args.final, grid_points=args.grid)
        summary.append([name, args.selector, sel.lam.lam, sel.lam.t, sel.value])
        est_cols[name] = sel.estimates
        curves[name] = sel.curve
    lams = next(iter(curves.values())).lams
    labels = [f"cv_{k.value}" for k in KINDS]
    table = np.column_stack([curves[k.value].values[:, 0] if k.value in curves
                             else np.full(lams.shape, np.nan) for k in KINDS])
    write_csv(out / "cv_curve.csv", ["lambda", "t", *labels],
              ([lams[i], lambda_to_t(lams[i]), *table[i]] for i in range(len(lams))))
    means = panel.means()
    write_csv(out / "cv_estimates.csv", ["id", "mean", *estimators],
              ([ids[i], means[i], *(est_cols[e][i] for e in estimators)] for i in range(len(ids))))
    write_csv(out / "summary.csv", ["estimator", "selector", "lambda", "t", "criterion"], summary)
    return EXIT_OK


def cmd_npeb(args) -> int:
    ids, x, scale, _ = _load_shrink_input(args)
    out = _outdir(args.output)
    mix = fit_em(x, grid_size=args.npeb_grid)
    write_csv(out / "mixture.csv", ["support", "weight"], zip(mix.support, mix.weights))
    xs, m_hat = shrinkage_grid(mix, 512)
    write_csv(out / "shrinkage.csv", ["x", "m_hat"], zip(xs, m_hat))
    est = np.asarray(npeb_m(mix, x))
    write_csv(out / "estimates.csv", ["id", "x", "npeb", "npeb_original"],
              zip(ids, x, est, destudentize(est, scale)))
    if not mix.converged:
        log.warning("EM stopped at the iteration cap before reaching the tolerance")
    return EXIT_OK


def _load_json(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise InputError(f"cannot read config {path}: {e}") from e


def cmd_surface(args) -> int:
    grid_spec = {}
    if args.config:
        try:
            grid_spec = json.loads(_load_json(args.config))
        except json.JSONDecodeError as e:
            raise InputError(f"bad JSON config: {e}") from e
        if not isinstance(grid_spec, dict):
            raise InputError("surface config must be a JSON object")
        unknown = set(grid_spec) - {"ps", "mu0s", "sigma0s", "sigma"}
        if unknown:
            raise InputError(f"unknown surface config keys: {sorted(unknown)}")
    try:
        grid = spike_normal_grid(**grid_spec)
    except (TypeError, ValueError) as e:
        raise InputError(f"bad surface grid: {e}") from e
    out = _outdir(args.output)
    risk_surface(grid, args.grid).to_csv(out / "risk_surface.csv")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = SimConfig.from_json(_load_json(args.config)) if args.config else SimConfig()
        if args.reps is not None:
            cfg.reps = args.reps
        if args.seed is not None:
            cfg.seed = args.seed
        if args.grid != DEFAULT_GRID_POINTS:
            cfg.grid_points = args.grid
        if args.estimators_given:
            cfg.estimators = tuple(_parse_estimators(args.estimators))
        cfg.__post_init__()
    except (json.JSONDecodeError, TypeError, ValueError) as e:
        raise InputError(f"bad simulation config: {e}") from e
    out = _outdir(args.output)
    run_study(cfg).to_csv(out / "sim_results.csv")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manymeans", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, input_required=True):
        p.add_argument("--input", required=input_required)
        p.add_argument("--output", required=True, help="output directory")
        p.add_argument("--estimators", default=None)
        p.add_argument("--selector", default="sure",
                       choices=["sure", "cv-holdout", "cv-loo", "fixed"])
        p.add_argument("--lambda", dest="lam", default=None, help="float or 'inf'")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--grid", type=int, default=DEFAULT_GRID_POINTS,
                       help="points in the lambda search grid")
        p.add_argument("--npeb-grid", type=int, default=GRID_SIZE)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--exclude-ids", default="")
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument("-v", "--verbose", action="store_true")

    p = sub.add_parser("shrink", help="SURE-tuned ridge/lasso/pretest (and NPEB) on an estimates file")
    common(p)
    p.set_defaults(func=cmd_shrink)

    p = sub.add_parser("cv", help="cross-validated shrinkage on a replicate panel")
    common(p)
    p.add_argument("--final", choices=["full", "holdout"], default="full")
    p.set_defaults(func=cmd_cv, selector="cv-loo")

    p = sub.add_parser("npeb", help="fit the EM grid prior and export its shrinkage function")
    common(p)
    p.set_defaults(func=cmd_npeb)

    p = sub.add_parser("surface", help="oracle integrated-risk surface on a spike-and-normal grid")
    common(p, input_required=False)
    p.set_defaults(func=cmd_surface)

    p = sub.add_parser("simulate", help="Monte Carlo study of data-driven selectors")
    common(p, input_required=False)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    args.estimators_given = args.estimators is not None
    if args.estimators is None:
        args.estimators = "ridge,lasso,pretest"
    args.exclude_ids = [s.strip() for s in args.exclude_ids.split(",") if s.strip()]
    if args.grid < 3:
        print("error: --grid must be at least 3", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except SelectorMismatch as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_MISMATCH
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (EvaluationError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as e:
        # PanelSample rejects k < 2: the data cannot support the cv selector.
        if "k >= 2" in str(e):
            print(f"error: {e}", file=sys.stderr)
            return EXIT_MISMATCH
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
