"""Pathwise coordinate descent for lasso, MCP and elastic-net least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .data import DataError, Dataset, PathFit, PenaltySpec, standardize
from .parallel import parallel_map
from .rng import substream

_FAMILY_CODE = {"lasso": _kernels.LASSO, "mcp": _kernels.MCP, "elastic-net": _kernels.ENET}


@dataclass(frozen=True)
class SolverConfig:
    max_iter: int = 100_000
    tol: float = 1e-7
    warm_start: bool = True

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")


def soft_threshold(z: float, t: float) -> float:
    if t < 0:
        raise ValueError("threshold must be nonnegative")
    return float(np.sign(z) * max(abs(z) - t, 0.0))


def coordinate_update(z: float, family: str, lam: float, gamma: float = 3.0, alpha: float = 1.0) -> float:
    """One-dimensional minimizer for a unit-scale column given ``z = x_j'r_j/n``."""
    if family == "mcp" and not gamma > 1:
        raise ValueError("MCP requires gamma > 1")
    spec = PenaltySpec(family, [lam], gamma, alpha)
    return float(_kernels.update(float(z), 1.0, lam, _FAMILY_CODE[spec.family], spec.gamma, spec.alpha))


def _col_scale(ds: Dataset) -> np.ndarray:
    return np.einsum("ij,ij->j", ds.X, ds.X) / ds.n


def fit_path(ds: Dataset, spec: PenaltySpec, cfg: SolverConfig | None = None) -> PathFit:
    """Fit the penalized path over ``spec.lambda_grid`` (largest lambda first).

    Non-convergence at a lambda is reported in ``converged`` rather than raised.
    """
    cfg = cfg or SolverConfig()
    if not np.any(ds.y):
        raise DataError("response is identically zero")
    X = np.asfortranarray(ds.X)
    v = _col_scale(ds)
    code = _FAMILY_CODE[spec.family]
    if cfg.warm_start:
        B, R, sweeps, conv = _kernels.solve_path(
            X, v, np.ascontiguousarray(ds.y, dtype=float), spec.lambda_grid,
            code, spec.gamma, spec.alpha, cfg.tol, cfg.max_iter, np.zeros(ds.p),
        )
    else:
        L = spec.lambda_grid.size
        B, R = np.zeros((ds.p, L)), np.zeros((ds.n, L))
        sweeps, conv = np.zeros(L, dtype=np.int64), np.zeros(L, dtype=bool)
        for k, lam in enumerate(spec.lambda_grid):
            b, r, s, c = _kernels.solve_path(
                X, v, np.ascontiguousarray(ds.y, dtype=float), np.array([lam]),
                code, spec.gamma, spec.alpha, cfg.tol, cfg.max_iter, np.zeros(ds.p),
            )
            B[:, k], R[:, k], sweeps[k], conv[k] = b[:, 0], r[:, 0], s[0], c[0]
    # recompute residuals exactly from the stored coefficients
    R = ds.y[:, None] - X @ B
    kkt = np.array([kkt_check(ds, B[:, k], spec, k) for k in range(B.shape[1])])
    for a in (B, R, kkt, conv, sweeps):
        a.setflags(write=False)
    return PathFit(spec, B, R, kkt, conv, sweeps)


def kkt_check(ds: Dataset, beta: np.ndarray, spec: PenaltySpec, index: int = 0) -> float:
    """Largest violation of the first-order stationarity conditions at ``spec.lambda_grid[index]``."""
    lam = float(spec.lambda_grid[index])
    beta = np.asarray(beta, dtype=float)
    r = ds.y - ds.X @ beta
    g = ds.X.T @ r / ds.n
    active = beta != 0
    s = np.sign(beta)
    if spec.family == "lasso":
        pen_grad = lam * s
        bound = lam
    elif spec.family == "mcp":
        pen_grad = np.where(np.abs(beta) <= spec.gamma * lam, lam * s - beta / spec.gamma, 0.0)
        bound = lam
    else:
        pen_grad = lam * spec.alpha * s + lam * (1 - spec.alpha) * beta
        bound = lam * spec.alpha
    viol_active = np.abs(g - pen_grad)[active]
    viol_inactive = np.maximum(0.0, np.abs(g) - bound)[~active]
    out = 0.0
    if viol_active.size:
        out = max(out, float(viol_active.max()))
    if viol_inactive.size:
        out = max(out, float(viol_inactive.max()))
    return out


def partial_residual_score(ds: Dataset, fit: PathFit, lam: float, j: int) -> float:
    """``x_j'(y - X_{-j} beta_{-j}) / n`` at grid value ``lam``."""
    k = fit.index_of(lam)
    return float(ds.X[:, j] @ fit.residuals[:, k] / ds.n + fit.beta[j, k])


def partial_residual_scores(ds: Dataset, fit: PathFit) -> np.ndarray:
    """All partial-residual scores, shape (p, L)."""
    return ds.X.T @ fit.residuals / ds.n + fit.beta


@dataclass(frozen=True)
class CVResult:
    lambdas: np.ndarray
    cv_error: np.ndarray
    cv_se: np.ndarray
    lambda_min: float
    folds: np.ndarray

    @property
    def index_min(self) -> int:
        return int(np.argmin(self.cv_error))


def assign_folds(n: int, k: int, seed: int) -> np.ndarray:
    """Fold label for each observation: a seeded shuffle of ``0..k-1`` repeated."""
    if k < 2 or n < k:
        raise ValueError(f"need 2 <= k <= n (k={k}, n={n})")
    labels = np.arange(n) % k
    return substream(seed, 0).permutation(labels)


def cross_validate(
    ds: Dataset,
    spec: PenaltySpec,
    k: int = 10,
    cfg: SolverConfig | None = None,
    seed: int = 0,
    threads: int | None = None,
) -> CVResult:
    """k-fold CV mean squared prediction error along ``spec.lambda_grid``.

    Each training fold is re-standardized; the original data's grid is used
    throughout.
    """
    cfg = cfg or SolverConfig()
    folds = assign_folds(ds.n, k, seed)
    sizes = np.bincount(folds, minlength=k)
    if sizes.min() < 1 or (ds.n - sizes.max()) < 2:
        raise ValueError("every training fold needs at least 2 observations")

    def one_fold(f):
        test = folds == f
        train = ~test
        tr = standardize(ds.X[train], ds.y[train], ds.feature_names)
        fit = fit_path(tr, spec, cfg)
        _, coef = tr.to_original_scale(fit.beta)
        intercept = tr.y_mean - tr.col_means @ coef
        pred = intercept + ds.X[test] @ coef
        return ((ds.y[test][:, None] - pred) ** 2).sum(axis=0)

    sse = np.array(parallel_map(one_fold, range(k), threads=threads))
    per_obs_fold = sse / sizes[:, None]
    err = sse.sum(axis=0) / ds.n
    se = per_obs_fold.std(axis=0, ddof=1) / np.sqrt(k)
    j = int(np.argmin(err))
    return CVResult(spec.lambda_grid, err, se, float(spec.lambda_grid[j]), folds)

