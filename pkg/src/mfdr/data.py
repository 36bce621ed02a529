"""Datasets, penalty specifications and path-fit containers."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FAMILIES = ("lasso", "mcp", "elastic-net")
_ALIASES = {"enet": "elastic-net", "elasticnet": "elastic-net"}


class DataError(ValueError):
    """Raised for malformed or degenerate input data."""


@dataclass(frozen=True)
class Dataset:
    """Centered response with a centered, unit-mean-square design.

    Attributes
    ----------
    X : (n, p) array with ``mean(X[:, j]) == 0`` and ``mean(X[:, j]**2) == 1``.
    y : (n,) centered response.
    col_means, col_scales : affine map back to the original feature scale,
        ``raw = X * col_scales + col_means``.
    y_mean : mean of the raw response.
    """

    X: np.ndarray
    y: np.ndarray
    col_means: np.ndarray
    col_scales: np.ndarray
    feature_names: tuple[str, ...]
    y_mean: float = 0.0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def with_response(self, y: np.ndarray) -> "Dataset":
        """Same design, new (re-centered) response."""
        y = np.asarray(y, dtype=float)
        if y.shape != (self.n,):
            raise DataError(f"response must have length {self.n}")
        mu = float(y.mean())
        return Dataset(self.X, y - mu, self.col_means, self.col_scales, self.feature_names, mu)

    def to_original_scale(self, beta: np.ndarray) -> tuple[float, np.ndarray]:
        """Return ``(intercept, coefficients)`` on the raw feature scale."""
        b = np.asarray(beta) / self.col_scales[:, None] if np.ndim(beta) == 2 else beta / self.col_scales
        intercept = self.y_mean - self.col_means @ b
        return intercept, b


def standardize(raw_X, raw_y, names: Sequence[str] | None = None) -> Dataset:
    """Center y, center X and scale each column to ``(1/n) sum x^2 = 1``."""
    X = np.array(raw_X, dtype=float, copy=True)
    y = np.array(raw_y, dtype=float, copy=True).ravel()
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DataError("design matrix must be two-dimensional")
    n, p = X.shape
    if n < 2:
        raise DataError(f"need at least 2 observations, got {n}")
    if y.shape[0] != n:
        raise DataError(f"response has {y.shape[0]} entries but X has {n} rows")
    if names is None:
        names = [f"V{j + 1}" for j in range(p)]
    names = tuple(str(s) for s in names)
    if len(names) != p:
        raise DataError(f"{len(names)} feature names for {p} columns")

    bad = ~np.isfinite(X)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise DataError(f"non-finite value at row {i + 1}, column {names[j]!r}")
    bad_y = np.flatnonzero(~np.isfinite(y))
    if bad_y.size:
        raise DataError(f"non-finite response at row {bad_y[0] + 1}")

    means = X.mean(axis=0)
    X -= means
    scales = np.sqrt((X**2).mean(axis=0))
    # relative test so huge-offset constant columns are caught too
    ref = np.maximum(np.abs(means), 1.0)
    const = scales <= 1e-12 * ref
    if const.any():
        raise DataError(f"constant column {names[int(np.flatnonzero(const)[0])]!r}")
    X /= scales
    y_mean = float(y.mean())
    y -= y_mean
    X.setflags(write=False)
    y.setflags(write=False)
    return Dataset(np.asfortranarray(X), y, means, scales, names, y_mean)


def lambda_max(ds: Dataset) -> float:
    """Smallest lambda giving the empty lasso model, ``max_j |x_j'y| / n``."""
    return float(np.max(np.abs(ds.X.T @ ds.y)) / ds.n)


def default_grid(ds: Dataset, length: int = 100, ratio: float | None = None) -> np.ndarray:
    """Log-spaced decreasing grid from ``lambda_max`` to ``ratio * lambda_max``.

    ``ratio`` defaults to 0.05 when p > n and 0.001 otherwise.
    """
    if length < 2:
        raise ValueError("grid length must be at least 2")
    if ratio is None:
        ratio = 0.05 if ds.p > ds.n else 0.001
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie in (0, 1)")
    lmax = lambda_max(ds)
    if lmax <= 0:
        raise DataError("response is orthogonal to every feature (lambda_max = 0)")
    return log_grid(lmax, ratio * lmax, length)


def log_grid(high: float, low: float, length: int) -> np.ndarray:
    g = np.exp(np.linspace(np.log(high), np.log(low), length))
    g[0], g[-1] = high, low
    return g


@dataclass(frozen=True)
class PenaltySpec:
    family: str
    lambda_grid: np.ndarray
    gamma: float = 3.0
    alpha: float = 1.0

    def __post_init__(self):
        fam = _ALIASES.get(self.family, self.family)
        if fam not in FAMILIES:
            raise ValueError(f"unknown penalty family {self.family!r}")
        object.__setattr__(self, "family", fam)
        g = np.array(self.lambda_grid, dtype=float).ravel()
        if g.size == 0 or np.any(g <= 0) or np.any(np.diff(g) >= 0):
            raise ValueError("lambda_grid must be a strictly decreasing positive sequence")
        g.setflags(write=False)
        object.__setattr__(self, "lambda_grid", g)
        if fam == "mcp" and not self.gamma > 1:
            raise ValueError("MCP requires gamma > 1")
        if fam == "elastic-net" and not 0 < self.alpha <= 1:
            raise ValueError("elastic net requires 0 < alpha <= 1")

    def threshold(self, lam):
        """Selection threshold on ``|x_j'r_j|/n``: lambda, or lambda*alpha for the elastic net."""
        return lam * self.alpha if self.family == "elastic-net" else lam

    def at(self, index: int) -> "PenaltySpec":
        return PenaltySpec(self.family, self.lambda_grid[index : index + 1], self.gamma, self.alpha)


@dataclass(frozen=True)
class PathFit:
    """Coefficients and residuals along a lambda grid (columns index lambda)."""

    spec: PenaltySpec
    beta: np.ndarray
    residuals: np.ndarray
    kkt_violation: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def lambdas(self) -> np.ndarray:
        return self.spec.lambda_grid

    @property
    def n_selected(self) -> np.ndarray:
        return np.count_nonzero(self.beta, axis=0)

    @property
    def selected(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.beta[:, k]) for k in range(self.beta.shape[1])]

    def index_of(self, lam: float) -> int:
        """Grid index of ``lam`` (must be on the grid up to rounding)."""
        k = int(np.argmin(np.abs(self.lambdas - lam)))
        if not np.isclose(self.lambdas[k], lam, rtol=1e-10, atol=0):
            raise ValueError(f"lambda={lam} is not on the fitted grid")
        return k


def read_csv(
    path: str | Path,
    response: str | None = None,
    y_file: str | Path | None = None,
) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Read a header-first numeric CSV; returns ``(X, y, feature_names)``.

    The response is either the column named ``response`` or the single
    column of ``y_file``.
    """
    header, rows = _read_table(path)
    if (response is None) == (y_file is None):
        raise DataError("give exactly one of a response column or a response file")
    table = _to_float(rows, header, path)
    if response is not None:
        if response not in header:
            raise DataError(f"response column {response!r} not found in {path}")
        k = header.index(response)
        y = table[:, k]
        keep = [i for i in range(len(header)) if i != k]
        return table[:, keep], y, [header[i] for i in keep]
    yh, yrows = _read_table(y_file)
    ytab = _to_float(yrows, yh, y_file)
    if ytab.shape[1] != 1:
        raise DataError(f"response file {y_file} must have one column")
    if ytab.shape[0] != table.shape[0]:
        raise DataError(f"response file has {ytab.shape[0]} rows, data has {table.shape[0]}")
    return table, ytab[:, 0], header


def _read_table(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}")
            rows.append(row)
    if not rows:
        raise DataError(f"{path} has no data rows")
    return header, rows


def _to_float(rows, header, path) -> np.ndarray:
    out = np.empty((len(rows), len(header)))
    for i, row in enumerate(rows):
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}:{i + 2}: cannot parse {cell!r} in column {header[j]!r}"
                ) from None
    return out
