import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import fista, objective, one_dim_min

from mfdr import (
    PenaltySpec,
    SolverConfig,
    coordinate_update,
    cross_validate,
    default_grid,
    fit_path,
    kkt_check,
    lambda_max,
    partial_residual_score,
    soft_threshold,
    standardize,
)
from mfdr import _kernels
from mfdr.solver import assign_folds, partial_residual_scores


def test_soft_threshold():
    assert soft_threshold(0.5, 1.0) == 0.0
    assert soft_threshold(2.0, 0.5) == 1.5
    assert soft_threshold(-2.0, 0.5) == -1.5
    for z in (-3.2, 0.0, 1e-9, 7.0):
        assert soft_threshold(z, 0.0) == z
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_coordinate_update_examples():
    assert coordinate_update(0.8, "lasso", 0.5) == pytest.approx(0.3)
    assert coordinate_update(2.0, "mcp", 0.5, gamma=3) == 2.0
    assert coordinate_update(1.0, "mcp", 0.5, gamma=3) == pytest.approx(0.75)
    assert coordinate_update(1.0, "elastic-net", 0.5, alpha=0.5) == pytest.approx(0.75 / 1.25)
    with pytest.raises(ValueError):
        coordinate_update(1.0, "mcp", 0.5, gamma=1.0)


@given(
    st.floats(-4, 4),
    st.sampled_from(["lasso", "mcp", "elastic-net"]),
    st.floats(0.05, 2),
    st.floats(1.5, 6),
    st.floats(0.1, 1),
)
def test_coordinate_update_minimizes_1d(z, family, lam, gamma, alpha):
    got = coordinate_update(z, family, lam, gamma, alpha)
    want = one_dim_min(z, family, lam, gamma, alpha)
    assert got == pytest.approx(want, abs=1e-6)


def test_orthonormal_closed_form(ortho_ds):
    ds = ortho_ds
    spec = PenaltySpec("lasso", default_grid(ds, 100, 0.01))
    fit = fit_path(ds, spec, SolverConfig(tol=1e-12))
    z = ds.X.T @ ds.y / ds.n
    for k, lam in enumerate(spec.lambda_grid):
        want = np.sign(z) * np.maximum(np.abs(z) - lam, 0)
        np.testing.assert_allclose(fit.beta[:, k], want, atol=1e-8, rtol=0)
    # exact monotonicity of |S| in lambda for orthonormal designs
    assert np.all(np.diff(fit.n_selected) >= 0)
    # scores are z_j regardless of lambda
    np.testing.assert_allclose(partial_residual_scores(ds, fit), np.repeat(z[:, None], 100, axis=1), atol=1e-10)


def test_above_lambda_max_is_empty(ortho_ds):
    lm = lambda_max(ortho_ds)
    for fam in ("lasso", "mcp", "elastic-net"):
        fit = fit_path(ortho_ds, PenaltySpec(fam, [lm * 1.01, lm]))
        assert fit.n_selected[0] == 0 and fit.n_selected[1] == 0
        assert fit.kkt_violation[0] == 0.0


@pytest.fixture(scope="module")
def random_ds():
    rng = np.random.default_rng(11)
    X = rng.standard_normal((100, 10))
    y = X[:, :3] @ [1.0, -0.5, 0.25] + rng.standard_normal(100)
    return standardize(X, y)


def test_matches_reference_solver(random_ds):
    ds = random_ds
    fit = fit_path(ds, PenaltySpec("lasso", [0.1]))
    ref = fista(ds.X, ds.y, 0.1)
    assert objective(ds.X, ds.y, fit.beta[:, 0], lam=0.1) <= objective(ds.X, ds.y, ref, lam=0.1) + 1e-8
    np.testing.assert_allclose(fit.beta[:, 0], ref, atol=1e-6)
    assert fit.kkt_violation[0] <= 1e-6


def test_elastic_net_matches_reference(random_ds):
    ds = random_ds
    fit = fit_path(ds, PenaltySpec("elastic-net", [0.2], alpha=0.4))
    ref = fista(ds.X, ds.y, 0.2, alpha=0.4)
    np.testing.assert_allclose(fit.beta[:, 0], ref, atol=1e-6)


@pytest.mark.parametrize("family,kw", [("lasso", {}), ("mcp", {"gamma": 3.0}), ("elastic-net", {"alpha": 0.5})])
def test_path_kkt_and_residuals(family, kw):
    rng = np.random.default_rng(4)
    X = rng.standard_normal((60, 120))
    X[:, 1] = X[:, 0] + 0.3 * rng.standard_normal(60)
    y = X[:, :4].sum(axis=1) + rng.standard_normal(60)
    ds = standardize(X, y)
    cfg = SolverConfig()
    fit = fit_path(ds, PenaltySpec(family, default_grid(ds, 50), **kw), cfg)
    assert fit.converged.all()
    assert fit.kkt_violation.max() <= 10 * cfg.tol
    np.testing.assert_allclose(fit.residuals, ds.y[:, None] - ds.X @ fit.beta, atol=1e-10)
    for k, sel in enumerate(fit.selected):
        np.testing.assert_array_equal(sel, np.flatnonzero(fit.beta[:, k]))
    lam = fit.lambdas
    thr = fit.spec.threshold(lam)
    scores = np.abs(partial_residual_scores(ds, fit))
    # inactive scores sit inside the threshold, active ones outside
    assert np.all(np.where(fit.beta == 0, scores <= thr + 1e-6, True))
    if family != "elastic-net":
        assert np.all(np.where(fit.beta != 0, scores > thr - 1e-6, True))


def test_partial_residual_score_single(random_ds):
    fit = fit_path(random_ds, PenaltySpec("lasso", default_grid(random_ds, 20)))
    lam = fit.lambdas[10]
    j = 2
    direct = random_ds.X[:, j] @ (random_ds.y - np.delete(random_ds.X, j, 1) @ np.delete(fit.beta[:, 10], j)) / 100
    assert partial_residual_score(random_ds, fit, lam, j) == pytest.approx(direct, abs=1e-12)
    with pytest.raises(ValueError):
        partial_residual_score(random_ds, fit, lam * 1.001, j)


def test_kkt_check_examples(ortho_ds):
    ds = ortho_ds
    lm = lambda_max(ds)
    assert kkt_check(ds, np.zeros(ds.p), PenaltySpec("lasso", [lm])) == 0.0
    z = ds.X.T @ ds.y / ds.n
    lam = 0.5 * lm
    exact = np.sign(z) * np.maximum(np.abs(z) - lam, 0)
    spec = PenaltySpec("lasso", [lam])
    assert kkt_check(ds, exact, spec) <= 1e-10
    j = int(np.flatnonzero(exact)[0])
    bumped = exact.copy()
    bumped[j] += 0.1
    assert kkt_check(ds, bumped, spec) >= 0.1 - 1e-10


def test_warm_equals_cold(random_ds):
    spec = PenaltySpec("lasso", default_grid(random_ds, 30, 0.01))
    warm = fit_path(random_ds, spec, SolverConfig(warm_start=True))
    cold = fit_path(random_ds, spec, SolverConfig(warm_start=False))
    np.testing.assert_allclose(warm.beta, cold.beta, atol=1e-6)


@pytest.mark.parametrize("family,kw", [("lasso", {}), ("elastic-net", {"alpha": 0.3})])
def test_objective_nonincreasing_over_sweeps(random_ds, family, kw):
    ds = random_ds
    spec = PenaltySpec(family, [0.05], **kw)
    code = {"lasso": _kernels.LASSO, "elastic-net": _kernels.ENET}[family]
    X = np.asfortranarray(ds.X)
    v = np.ones(ds.p)
    vals = []
    for sweeps in range(1, 30):
        beta = np.zeros(ds.p)
        r = np.array(ds.y)
        _kernels.solve(X, v, r, beta, 0.05, code, 3.0, spec.alpha, 1e-14, sweeps)
        vals.append(objective(ds.X, ds.y, beta, family, 0.05, alpha=spec.alpha))
    assert np.all(np.diff(vals) <= 1e-14)


def test_mean_selected_nonincreasing_on_random_designs():
    rng = np.random.default_rng(8)
    grid = np.geomspace(0.6, 0.05, 12)
    counts = []
    for _ in range(30):
        X = rng.standard_normal((50, 40))
        ds = standardize(X, X[:, 0] + rng.standard_normal(50))
        counts.append(fit_path(ds, PenaltySpec("lasso", grid)).n_selected)
    assert np.all(np.diff(np.mean(counts, axis=0)) >= 0)


def test_duplicate_columns_still_stationary():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(40)
    X = np.column_stack([x, x, rng.standard_normal(40)])
    ds = standardize(X, 2 * x + rng.standard_normal(40))
    fit = fit_path(ds, PenaltySpec("lasso", default_grid(ds, 20)))
    assert fit.kkt_violation.max() <= 1e-6


def test_nonconvergence_flagged(random_ds):
    fit = fit_path(random_ds, PenaltySpec("lasso", [0.01]), SolverConfig(max_iter=1, tol=1e-12))
    assert not fit.converged[0]


def test_zero_response_rejected(random_ds):
    with pytest.raises(ValueError, match="zero"):
        fit_path(random_ds.with_response(np.zeros(random_ds.n)), PenaltySpec("lasso", [0.1]))


def test_cv_leave_one_out_matches_refit_loop():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((6, 3))
    ds = standardize(X, X[:, 0] + 0.5 * rng.standard_normal(6))
    spec = PenaltySpec("lasso", default_grid(ds, 8, 0.05))
    cv = cross_validate(ds, spec, k=6, seed=3)
    sq = np.zeros(8)
    for i in range(6):
        keep = np.arange(6) != i
        Xt, yt = ds.X[keep], ds.y[keep]
        mu, sd = Xt.mean(0), np.sqrt(((Xt - Xt.mean(0)) ** 2).mean(0))
        tr = standardize(Xt, yt)
        b = fit_path(tr, spec).beta / sd[:, None]
        pred = yt.mean() + (ds.X[i] - mu) @ b
        sq += (ds.y[i] - pred) ** 2
    np.testing.assert_allclose(cv.cv_error, sq / 6, rtol=1e-10)
    assert cv.lambda_min == spec.lambda_grid[np.argmin(sq)]


def test_cv_determinism_and_threads(random_ds):
    spec = PenaltySpec("lasso", default_grid(random_ds, 20))
    a = cross_validate(random_ds, spec, k=5, seed=9, threads=1)
    b = cross_validate(random_ds, spec, k=5, seed=9, threads=4)
    np.testing.assert_array_equal(a.cv_error, b.cv_error)
    np.testing.assert_array_equal(a.folds, b.folds)
    assert sorted(np.bincount(a.folds)) == [20] * 5


def test_cv_fold_errors():
    with pytest.raises(ValueError):
        assign_folds(5, 1, 0)
    with pytest.raises(ValueError):
        assign_folds(3, 4, 0)
