"""Permutation estimates of the expected number of noise selections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .analytic import MfdrTable, _sigma_column, mfdr_ratio
from .data import Dataset, PathFit, PenaltySpec
from .parallel import parallel_map
from .rng import substream
from .solver import _FAMILY_CODE, SolverConfig, _col_scale, fit_path


@dataclass(frozen=True)
class PermutationPlan:
    B: int = 100
    seed: int = 0
    method: str = "perm-y"

    def __post_init__(self):
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if self.method not in ("perm-y", "perm-r"):
            raise ValueError(f"unknown permutation method {self.method!r}")

    def permutation(self, b: int, n: int) -> np.ndarray:
        """Index permutation for replicate ``b`` (depends only on seed and b)."""
        return substream(self.seed, b).permutation(n)


class GridMismatchError(ValueError):
    pass


def _check_grid(spec: PenaltySpec, fit: PathFit):
    g0, g1 = spec.lambda_grid, fit.lambdas
    if g0.shape != g1.shape or not np.allclose(g0, g1, rtol=1e-12, atol=0):
        raise GridMismatchError("lambda grid does not match the original fit's grid")


def _table(fd_counts: np.ndarray, fit: PathFit, ds: Dataset, method: str) -> MfdrTable:
    # summation over b in index order keeps the result schedule-independent
    fd = fd_counts.sum(axis=0) / fd_counts.shape[0]
    n_sel = fit.n_selected.copy()
    return MfdrTable(fit.lambdas.copy(), n_sel, _sigma_column(fit, ds.n), fd, mfdr_ratio(fd, n_sel), method)


def mfdr_perm_y(
    ds: Dataset,
    spec: PenaltySpec,
    cfg: SolverConfig | None = None,
    plan: PermutationPlan | None = None,
    original_fit: PathFit | None = None,
    threads: int | None = None,
) -> MfdrTable:
    """Average selected count over B paths fitted to permuted responses."""
    cfg = cfg or SolverConfig()
    plan = plan or PermutationPlan(method="perm-y")
    if plan.method != "perm-y":
        raise ValueError("plan.method must be 'perm-y'")
    fit = original_fit if original_fit is not None else fit_path(ds, spec, cfg)
    _check_grid(spec, fit)
    X, v = np.asfortranarray(ds.X), _col_scale(ds)
    code = _FAMILY_CODE[spec.family]
    y = np.ascontiguousarray(ds.y)

    def one(b):
        yb = y[plan.permutation(b, ds.n)]
        yb = yb - yb.mean()
        return _kernels.perm_path_counts(
            X, v, yb, spec.lambda_grid, code, spec.gamma, spec.alpha, cfg.tol, cfg.max_iter
        )

    counts = np.array(parallel_map(one, range(plan.B), threads=threads))
    return _table(counts, fit, ds, "perm-y")


def mfdr_perm_r(
    ds: Dataset,
    spec: PenaltySpec,
    cfg: SolverConfig | None = None,
    plan: PermutationPlan | None = None,
    original_fit: PathFit | None = None,
    threads: int | None = None,
) -> MfdrTable:
    """Average selected count when refitting permuted residuals at each lambda.

    Replicate ``b`` applies one permutation to every residual column of the
    original fit; its refits run down the grid warm-started unless
    ``cfg.warm_start`` is false.
    """
    cfg = cfg or SolverConfig()
    plan = plan or PermutationPlan(method="perm-r")
    if plan.method != "perm-r":
        raise ValueError("plan.method must be 'perm-r'")
    fit = original_fit if original_fit is not None else fit_path(ds, spec, cfg)
    _check_grid(spec, fit)
    X, v = np.asfortranarray(ds.X), _col_scale(ds)
    code = _FAMILY_CODE[spec.family]
    R = np.asarray(fit.residuals)

    def one(b):
        Rb = np.asfortranarray(R[plan.permutation(b, ds.n)])
        return _kernels.perm_resid_counts(
            X, v, Rb, spec.lambda_grid, code, spec.gamma, spec.alpha, cfg.tol, cfg.max_iter,
            cfg.warm_start,
        )

    counts = np.array(parallel_map(one, range(plan.B), threads=threads))
    return _table(counts, fit, ds, "perm-r")


def mfdr_perm(ds, spec, cfg=None, plan=None, original_fit=None, threads=None) -> MfdrTable:
    plan = plan or PermutationPlan()
    f = mfdr_perm_y if plan.method == "perm-y" else mfdr_perm_r
    return f(ds, spec, cfg, plan, original_fit, threads)
