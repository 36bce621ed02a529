"""Penalized regression paths with marginal false discovery rate estimates."""

from .analytic import MfdrTable, SaturatedModelError, estimate_sigma, mfdr_analytic, noise_score_distribution
from .data import DataError, Dataset, PathFit, PenaltySpec, default_grid, lambda_max, read_csv, standardize
from .permutation import PermutationPlan, mfdr_perm_r, mfdr_perm_y
from .simulation import (
    PRESETS,
    SimDesign,
    StudyConfig,
    TruthLabels,
    bivariate_region_classify,
    choose_lambda_mfdr,
    generate,
    preset,
    replicate_study,
    true_counts,
)
from .solver import (
    SolverConfig,
    coordinate_update,
    cross_validate,
    fit_path,
    kkt_check,
    partial_residual_score,
    soft_threshold,
)

__version__ = "0.1.0"
