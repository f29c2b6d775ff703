"""Reading inputs: studentized estimates, replicate panels, and orthogonalized regressions."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .cv import PanelSample


class InputError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class RawEstimates:
    ids: tuple
    estimates: np.ndarray
    std_errors: np.ndarray

    def __post_init__(self):
        est = np.asarray(self.estimates, dtype=float).ravel()
        se = np.asarray(self.std_errors, dtype=float).ravel()
        if not (len(self.ids) == est.size == se.size):
            raise InputError("ids, estimates and std_errors must have equal lengths")
        if est.size == 0:
            raise InputError("no estimates")
        if not (np.isfinite(est).all() and np.isfinite(se).all()):
            raise InputError("estimates and standard errors must be finite")
        if (se <= 0).any():
            raise InputError("standard errors must be strictly positive")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "estimates", est)
        object.__setattr__(self, "std_errors", se)

    def exclude(self, ids: Sequence[str]) -> "RawEstimates":
        drop = set(ids)
        keep = [i for i, name in enumerate(self.ids) if name not in drop]
        return RawEstimates(tuple(self.ids[i] for i in keep), self.estimates[keep], self.std_errors[keep])


def studentize(raw: RawEstimates) -> tuple[np.ndarray, np.ndarray]:
    """Divide each estimate by its standard error; returns (x, scale)."""
    return raw.estimates / raw.std_errors, raw.std_errors.copy()


def destudentize(x, scale) -> np.ndarray:
    return np.asarray(x, dtype=float) * np.asarray(scale, dtype=float)


class Orthogonalized(NamedTuple):
    x: np.ndarray            # OLS coefficients on the orthonormalized design
    noise_scale: float       # sigma_hat / sqrt(N)
    design: np.ndarray       # V = W Omega^{-1/2}
    omega_sqrt: np.ndarray   # Omega^{1/2}
    omega_inv_sqrt: np.ndarray


def orthogonalize(W, Y, rank_tol: float = 1e-10) -> Orthogonalized:
    """Rotate regressors so V'V/N = I and return the OLS coefficients on V.

    The symmetric square root of Omega = W'W/N is used, so the coefficients
    estimate Omega^{1/2} beta. A relative eigenvalue below ``rank_tol`` is an
    error; no pseudo-inverse is attempted.
    """
    W = np.asarray(W, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if W.ndim != 2 or W.shape[0] != Y.size:
        raise InputError("design must be N x n with one outcome per row")
    N, n = W.shape
    if N < n:
        raise InputError(f"need at least as many observations as regressors (N={N}, n={n})")
    omega = W.T @ W / N
    evals, evecs = np.linalg.eigh(omega)
    if evals.max() <= 0 or evals.min() <= rank_tol * evals.max():
        raise InputError("design is rank deficient")
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.T
    root = (evecs * np.sqrt(evals)) @ evecs.T
    V = W @ inv_sqrt
    x = np.linalg.solve(V.T @ V, V.T @ Y)
    resid = Y - V @ x
    noise_scale = math.sqrt(float(resid @ resid) / (N - n)) / math.sqrt(N) if N > n else math.nan
    return Orthogonalized(x, noise_scale, V, root, inv_sqrt)


def _read_rows(path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError) as e:
        raise InputError(f"cannot read {path}: {e}") from e
    if not rows:
        raise InputError(f"{path} is empty")
    return [h.strip() for h in rows[0]], rows[1:]


def _float(value: str, where: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise InputError(f"not a number at {where}: {value!r}") from None


def read_header(path) -> list[str]:
    return _read_rows(path)[0]


def read_estimates(path) -> RawEstimates:
    """CSV with columns id,estimate,std_error."""
    header, rows = _read_rows(path)
    need = ("id", "estimate", "std_error")
    if any(c not in header for c in need):
        raise InputError(f"estimates CSV needs columns {','.join(need)}; got {','.join(header)}")
    ci = [header.index(c) for c in need]
    ids, est, se = [], [], []
    for line, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise InputError(f"line {line}: expected {len(header)} fields, got {len(r)}")
        ids.append(r[ci[0]].strip())
        est.append(_float(r[ci[1]], f"line {line}"))
        se.append(_float(r[ci[2]], f"line {line}"))
    if len(set(ids)) != len(ids):
        raise InputError("duplicate ids in estimates CSV")
    return RawEstimates(tuple(ids), np.array(est), np.array(se))


def read_panel(path) -> tuple[list[str], PanelSample]:
    """CSV with columns id,rep,value; every id must have reps 1..k.

    Raises:
        InputError: malformed file or an incomplete panel.
        ValueError: from PanelSample, when k < 2.
    """
    header, rows = _read_rows(path)
    need = ("id", "rep", "value")
    if any(c not in header for c in need):
        raise InputError(f"panel CSV needs columns {','.join(need)}; got {','.join(header)}")
    ci = [header.index(c) for c in need]
    cells: dict[str, dict[int, float]] = {}
    for line, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise InputError(f"line {line}: expected {len(header)} fields, got {len(r)}")
        rep = _float(r[ci[1]], f"line {line}")
        if rep != int(rep) or rep < 1:
            raise InputError(f"line {line}: rep must be a positive integer")
        unit = cells.setdefault(r[ci[0]].strip(), {})
        if int(rep) in unit:
            raise InputError(f"line {line}: duplicate rep {int(rep)} for id {r[ci[0]]!r}")
        unit[int(rep)] = _float(r[ci[2]], f"line {line}")
    if not cells:
        raise InputError("panel CSV has no data rows")
    ids = list(cells)
    k = len(cells[ids[0]])
    for i in ids:
        if sorted(cells[i]) != list(range(1, k + 1)):
            raise InputError(f"panel is not rectangular: id {i!r} lacks reps 1..{k}")
    values = np.array([[cells[i][j] for j in range(1, k + 1)] for i in ids])
    return ids, PanelSample(values)


def read_regression(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    """CSV with first column y and the regressors after it; returns (names, W, Y)."""
    header, rows = _read_rows(path)
    if not header or header[0] != "y" or len(header) < 2:
        raise InputError("regression CSV must start with a 'y' column followed by regressors")
    data = []
    for line, r in enumerate(rows, start=2):
        if len(r) != len(header):
            raise InputError(f"line {line}: expected {len(header)} fields, got {len(r)}")
        data.append([_float(v, f"line {line}") for v in r])
    arr = np.array(data, dtype=float)
    if arr.size == 0:
        raise InputError("regression CSV has no data rows")
    return header[1:], arr[:, 1:], arr[:, 0]
