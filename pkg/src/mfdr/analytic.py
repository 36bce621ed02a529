"""Analytic expected-false-discovery and mFDR estimates along a path."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import Dataset, PathFit

METHODS = ("analytic", "perm-y", "perm-r")
TABLE_COLUMNS = ("lambda", "n_selected", "sigma_hat", "expected_fd", "mfdr", "method")


class SaturatedModelError(ValueError):
    """The selected set is as large as the sample; sigma cannot be estimated."""


@dataclass(frozen=True)
class MfdrTable:
    """Per-lambda mFDR estimates. Undefined rows hold NaN in the float columns."""

    lambdas: np.ndarray
    n_selected: np.ndarray
    sigma_hat: np.ndarray
    expected_fd: np.ndarray
    mfdr: np.ndarray
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    def __len__(self):
        return len(self.lambdas)

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.mfdr)

    def rows(self):
        for k in range(len(self)):
            yield {
                "lambda": float(self.lambdas[k]),
                "n_selected": int(self.n_selected[k]),
                "sigma_hat": _num(self.sigma_hat[k]),
                "expected_fd": _num(self.expected_fd[k]),
                "mfdr": _num(self.mfdr[k]),
                "method": self.method,
            }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TABLE_COLUMNS)
        for row in self.rows():
            w.writerow([_fmt(row[c]) for c in TABLE_COLUMNS])
        return buf.getvalue()

    def to_json(self, **extra) -> str:
        return json.dumps({**extra, "method": self.method, "rows": list(self.rows())}, indent=1)

    @classmethod
    def from_csv(cls, text: str) -> "MfdrTable":
        rows = list(csv.DictReader(io.StringIO(text)))
        methods = {r["method"] for r in rows}
        if len(methods) != 1:
            raise ValueError("a table holds exactly one method")
        col = lambda c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows])
        return cls(col("lambda"), col("n_selected").astype(int), col("sigma_hat"),
                   col("expected_fd"), col("mfdr"), methods.pop())


def _num(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def mfdr_ratio(expected_fd, n_selected) -> np.ndarray:
    """``min(1, FD/|S|)`` with 0 for empty models; NaN propagates."""
    fd = np.asarray(expected_fd, dtype=float)
    s = np.asarray(n_selected, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.minimum(1.0, fd / s)
    return np.where(s == 0, 0.0, out)


def estimate_sigma(fit: PathFit, ds: Dataset, lam: float) -> float:
    """``sqrt(r'r / (n - |S|))`` at ``lam``."""
    k = fit.index_of(lam)
    if fit.n_selected[k] >= ds.n:
        raise SaturatedModelError(f"|S|={fit.n_selected[k]} >= n={ds.n} at lambda={lam:g}")
    return float(_sigma_column(fit, ds.n)[k])


def _sigma_column(fit: PathFit, n: int) -> np.ndarray:
    rss = np.einsum("ij,ij->j", fit.residuals, fit.residuals)
    df = n - fit.n_selected
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(df > 0, np.sqrt(rss / np.where(df > 0, df, 1)), np.nan)


def expected_false_discoveries(p: int, n: int, threshold, sigma) -> np.ndarray:
    """``2 p Phi(-sqrt(n) * threshold / sigma)``."""
    return 2.0 * p * norm.cdf(-np.sqrt(n) * np.asarray(threshold) / np.asarray(sigma))


def mfdr_analytic(fit: PathFit, ds: Dataset, n_null: int | None = None, sigma=None) -> MfdrTable:
    """Analytic table for a fitted path.

    ``n_null`` replaces p as the null-count bound and ``sigma`` fixes the
    noise SD (scalar or per-lambda); both exist for verification studies.
    """
    n_sel = fit.n_selected
    sig = _sigma_column(fit, ds.n) if sigma is None else np.broadcast_to(np.asarray(sigma, float), n_sel.shape).copy()
    thr = fit.spec.threshold(fit.lambdas)
    fd = expected_false_discoveries(ds.p if n_null is None else n_null, ds.n, thr, sig)
    return MfdrTable(fit.lambdas.copy(), n_sel.copy(), sig, fd, mfdr_ratio(fd, n_sel), "analytic")


def noise_score_distribution(ds: Dataset, fit: PathFit, lam: float, noise_indices) -> np.ndarray:
    """``sqrt(n) * score_j / sigma_hat`` for the given noise features at ``lam``."""
    k = fit.index_of(lam)
    sigma = estimate_sigma(fit, ds, lam)
    idx = np.asarray(noise_indices, dtype=int)
    scores = ds.X[:, idx].T @ fit.residuals[:, k] / ds.n + fit.beta[idx, k]
    return np.sqrt(ds.n) * scores / sigma
