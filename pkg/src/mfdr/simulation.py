"""Synthetic designs with known truth, replicate studies and the bivariate selection oracle."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .analytic import MfdrTable, mfdr_analytic
from .data import Dataset, PathFit, PenaltySpec, log_grid, standardize
from .parallel import parallel_map
from .permutation import PermutationPlan, mfdr_perm_r, mfdr_perm_y
from .rng import derive_seed, substream
from .solver import SolverConfig, fit_path

NOISE_STRUCTURES = ("independent", "ar", "exchangeable")


@dataclass(frozen=True)
class SimDesign:
    """Causative / correlated / noise generative design.

    Causative features are i.i.d. N(0, 1) with coefficient ``beta``; each has
    ``m`` correlated (null-coefficient) children at correlation ``rho_corr``;
    the remaining features form the noise block.
    """

    n: int = 100
    p: int = 60
    causative: int = 6
    beta: float = 1.0 / math.sqrt(6.0)
    m: int = 2
    rho_corr: float = 0.5
    noise_structure: str = "independent"
    noise_rho: float = 0.0
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.noise_structure not in NOISE_STRUCTURES:
            raise ValueError(f"unknown noise structure {self.noise_structure!r}")
        if self.n < 2 or self.causative < 0 or self.m < 0:
            raise ValueError("n >= 2 and nonnegative feature counts required")
        if self.noise_count < 0:
            raise ValueError(
                f"causative*(1+m) = {self.causative * (1 + self.m)} exceeds p = {self.p}"
            )
        if self.causative == 0 and self.m:
            raise ValueError("correlated features need a causative parent")
        for name in ("rho_corr", "noise_rho"):
            if not -1 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (-1, 1)")
        if self.noise_structure == "exchangeable" and self.noise_rho < 0:
            raise ValueError("exchangeable correlation must be nonnegative")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def correlated_count(self) -> int:
        return self.causative * self.m

    @property
    def noise_count(self) -> int:
        return self.p - self.causative * (1 + self.m)

    @property
    def signal_variance(self) -> float:
        return self.causative * self.beta**2

    @property
    def r_squared(self) -> float:
        s = self.signal_variance
        return s / (s + self.sigma**2)


@dataclass(frozen=True)
class TruthLabels:
    causative: np.ndarray
    correlated: np.ndarray
    noise: np.ndarray

    def __post_init__(self):
        allidx = np.concatenate([self.causative, self.correlated, self.noise])
        if np.unique(allidx).size != allidx.size:
            raise ValueError("truth sets overlap")

    @property
    def p(self) -> int:
        return self.causative.size + self.correlated.size + self.noise.size


def _noise_block(rng, n, k, structure, rho):
    E = rng.standard_normal((n, k))
    if structure == "independent" or k == 0:
        return E
    if structure == "ar":
        N = np.empty_like(E)
        N[:, 0] = E[:, 0]
        c = math.sqrt(1 - rho**2)
        for j in range(1, k):
            N[:, j] = rho * N[:, j - 1] + c * E[:, j]
        return N
    w = rng.standard_normal((n, 1))
    return math.sqrt(rho) * w + math.sqrt(1 - rho) * E


def generate(design: SimDesign, rng: np.random.Generator | None = None) -> tuple[Dataset, TruthLabels]:
    """Draw one dataset; ``rng`` defaults to the stream seeded by ``design.seed``."""
    rng = substream(design.seed) if rng is None else rng
    n, a, m = design.n, design.causative, design.m
    Z = rng.standard_normal((n, a))
    blocks = [Z]
    names = [f"A{i + 1}" for i in range(a)]
    if m:
        noise = rng.standard_normal((n, a * m))
        C = design.rho_corr * np.repeat(Z, m, axis=1) + math.sqrt(1 - design.rho_corr**2) * noise
        blocks.append(C)
        names += [f"B{i + 1}_{k + 1}" for i in range(a) for k in range(m)]
    k = design.noise_count
    blocks.append(_noise_block(rng, n, k, design.noise_structure, design.noise_rho))
    names += [f"N{i + 1}" for i in range(k)]
    X = np.hstack(blocks)
    y = design.beta * Z.sum(axis=1) + design.sigma * rng.standard_normal(n)
    ds = standardize(X, y, names)
    c = design.correlated_count
    labels = TruthLabels(np.arange(a), np.arange(a, a + c), np.arange(a + c, design.p))
    return ds, labels


@dataclass(frozen=True)
class TrueCounts:
    false_discoveries: np.ndarray
    correlated: np.ndarray
    causative: np.ndarray
    n_selected: np.ndarray


def true_counts(fit: PathFit, labels: TruthLabels) -> TrueCounts:
    """Per-lambda counts of selected noise, correlated and causative features."""
    if labels.p != fit.beta.shape[0]:
        raise ValueError("labels do not match the fit's feature count")
    nz = fit.beta != 0
    f = lambda idx: nz[idx].sum(axis=0)
    return TrueCounts(f(labels.noise), f(labels.correlated), f(labels.causative), nz.sum(axis=0))


@dataclass(frozen=True)
class LambdaChoice:
    lam: float | None
    index: int | None
    found: bool
    n_selected: int = 0


def choose_lambda_mfdr(table: MfdrTable, target: float = 0.1) -> LambdaChoice:
    """Smallest grid lambda with a nonempty model whose estimated mFDR is below ``target``.

    When no nonempty model qualifies, ``found`` is False and ``lam`` is the
    smallest lambda of the empty-model region (None if the path has none).
    """
    if len(table) == 0:
        raise ValueError("empty table")
    order = np.argsort(table.lambdas)  # ascending
    mf = table.mfdr
    ok = np.isfinite(mf) & (mf < target) & (table.n_selected > 0)
    for k in order:
        if ok[k]:
            return LambdaChoice(float(table.lambdas[k]), int(k), True, int(table.n_selected[k]))
    for k in order:
        if table.n_selected[k] == 0:
            return LambdaChoice(float(table.lambdas[k]), int(k), False, 0)
    return LambdaChoice(None, None, False, 0)


# -- replicate studies -----------------------------------------------------------------


@dataclass(frozen=True)
class StudyConfig:
    lambdas: tuple[float, ...]
    family: str = "lasso"
    gamma: float = 3.0
    alpha: float = 1.0
    methods: tuple[str, ...] = ("analytic",)
    R: int = 100
    B: int = 100
    seed: int = 0
    mfdr_target: float | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)

    def penalty(self) -> PenaltySpec:
        return PenaltySpec(self.family, np.asarray(self.lambdas), self.gamma, self.alpha)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambdas"] = list(self.lambdas)
        d["methods"] = list(self.methods)
        return d


def replicate_rng(seed: int, r: int) -> np.random.Generator:
    """Data stream for replicate ``r``."""
    return substream(seed, r, 0)


def permutation_seed(seed: int, r: int, method: str) -> int:
    return derive_seed(seed, r, 1 + ("perm-y", "perm-r").index(method))


def run_replicate(design: SimDesign, cfg: StudyConfig, r: int) -> dict:
    """Generate, fit and estimate for replicate ``r``; returns per-lambda arrays."""
    spec = cfg.penalty()
    ds, labels = generate(design, replicate_rng(cfg.seed, r))
    fit = fit_path(ds, spec, cfg.solver)
    tc = true_counts(fit, labels)
    out = {
        "n_selected": tc.n_selected,
        "fd_true": tc.false_discoveries,
        "correlated": tc.correlated,
        "causative": tc.causative,
        "converged": fit.converged,
    }
    tables: dict[str, MfdrTable] = {}
    for method in cfg.methods:
        if method == "analytic":
            tables[method] = mfdr_analytic(fit, ds)
        else:
            plan = PermutationPlan(cfg.B, permutation_seed(cfg.seed, r, method), method)
            f = mfdr_perm_y if method == "perm-y" else mfdr_perm_r
            tables[method] = f(ds, spec, cfg.solver, plan, fit, threads=1)
        out[f"efd:{method}"] = tables[method].expected_fd
        out[f"mfdr:{method}"] = tables[method].mfdr
    if cfg.mfdr_target is not None:
        t = tables.get("analytic") or mfdr_analytic(fit, ds)
        ch = choose_lambda_mfdr(t, cfg.mfdr_target)
        k = ch.index if ch.found else None
        out["rule"] = {
            "found": ch.found,
            "index": -1 if k is None else k,
            "n_selected": 0 if k is None else int(tc.n_selected[k]),
            "fd_true": 0 if k is None else int(tc.false_discoveries[k]),
            "correlated": 0 if k is None else int(tc.correlated[k]),
            "causative": 0 if k is None else int(tc.causative[k]),
        }
    return out


class StudyAborted(RuntimeError):
    pass


@dataclass
class StudyResult:
    design: SimDesign
    config: StudyConfig
    per_rep: dict[str, np.ndarray]
    failures: list[tuple[int, str]]
    rule: dict[str, np.ndarray] | None = None

    @property
    def lambdas(self) -> np.ndarray:
        return np.asarray(self.config.lambdas)

    @property
    def R_used(self) -> int:
        return self.per_rep["n_selected"].shape[0]

    def mean(self, key: str) -> np.ndarray:
        return np.nanmean(self.per_rep[key], axis=0)

    def se(self, key: str) -> np.ndarray:
        a = self.per_rep[key]
        k = np.sum(np.isfinite(a), axis=0)
        return np.nanstd(a, axis=0, ddof=1) / np.sqrt(k)

    def true_mfdr(self) -> np.ndarray:
        """mean(noise selections) / mean(|S|), 0 where no replicate selects anything."""
        return _ratio(self.per_rep["fd_true"], self.per_rep["n_selected"])

    def estimated_mfdr(self, method: str) -> np.ndarray:
        """Ratio-of-means estimate ``min(1, mean(FD_hat) / mean(|S|))``."""
        return np.minimum(1.0, _ratio(self.per_rep[f"efd:{method}"], self.per_rep["n_selected"]))

    def mean_mfdr(self, method: str) -> np.ndarray:
        """Mean of per-replicate estimated mFDR values (empty models count as 0)."""
        return self.mean(f"mfdr:{method}")

    def true_mfdr_se(self) -> np.ndarray:
        return _ratio_se(self.per_rep["fd_true"], self.per_rep["n_selected"])

    def estimated_mfdr_se(self, method: str) -> np.ndarray:
        return _ratio_se(self.per_rep[f"efd:{method}"], self.per_rep["n_selected"])

    def at(self, values: np.ndarray, lam: float) -> float:
        """Interpolate a per-lambda curve at ``lam`` (linear in log lambda)."""
        return interpolate(self.lambdas, values, lam)

    def rule_true_mfdr(self) -> float:
        r = self.rule
        tot = r["n_selected"].sum()
        return float(r["fd_true"].sum() / tot) if tot else 0.0

    def aggregate_rows(self) -> list[tuple[float, str, str, float]]:
        """Long-format ``(lambda, statistic, method, value)`` rows."""
        rows = []
        lam = self.lambdas
        curves = [
            ("n_selected", "truth", self.mean("n_selected")),
            ("false_discoveries", "truth", self.mean("fd_true")),
            ("correlated_selected", "truth", self.mean("correlated")),
            ("causative_selected", "truth", self.mean("causative")),
            ("mfdr", "truth", self.true_mfdr()),
            ("mfdr_se", "truth", self.true_mfdr_se()),
        ]
        for m in self.config.methods:
            curves += [
                ("expected_fd", m, self.mean(f"efd:{m}")),
                ("mfdr", m, self.estimated_mfdr(m)),
                ("mfdr_se", m, self.estimated_mfdr_se(m)),
                ("mean_replicate_mfdr", m, self.mean_mfdr(m)),
            ]
        for k in range(lam.size):
            for stat, method, values in curves:
                rows.append((float(lam[k]), stat, method, float(values[k])))
        return rows


def _ratio(num, den):
    a = np.nansum(num, axis=0)
    b = np.sum(np.where(np.isfinite(num), den, 0), axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(b > 0, a / np.where(b > 0, b, 1), 0.0)


def _ratio_se(num, den):
    """Delta-method standard error of a ratio of means over replicates."""
    num = np.asarray(num, float)
    den = np.asarray(den, float)
    ok = np.isfinite(num)
    k = ok.sum(axis=0)
    mx = np.nansum(num, axis=0) / k
    my = np.sum(np.where(ok, den, 0), axis=0) / k
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(my > 0, mx / my, 0.0)
        resid = np.where(ok, num - q * den, 0.0)
        var = (resid**2).sum(axis=0) / np.maximum(k - 1, 1) / k
        return np.where(my > 0, np.sqrt(var) / my, 0.0)


def interpolate(lambdas, values, lam: float) -> float:
    lam_arr = np.asarray(lambdas, float)
    if not lam_arr.min() <= lam <= lam_arr.max():
        raise ValueError(f"lambda={lam} lies outside the grid")
    x = np.log(lam_arr[::-1])
    return float(np.interp(np.log(lam), x, np.asarray(values, float)[::-1]))


def replicate_study(
    design: SimDesign,
    cfg: StudyConfig,
    threads: int | None = None,
    max_failure_rate: float = 0.05,
    progress=None,
) -> StudyResult:
    """Run ``cfg.R`` independent replicates and collect per-lambda arrays.

    Failing replicates are recorded and excluded; more than
    ``max_failure_rate`` of them aborts the study.
    """
    if cfg.R < 1:
        raise ValueError("R must be >= 1")

    def job(r):
        try:
            res = run_replicate(design, cfg, r)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            res = exc
        if progress is not None:
            progress(r)
        return res

    results = parallel_map(job, range(cfg.R), threads=threads)
    failures = [(r, repr(x)) for r, x in enumerate(results) if isinstance(x, Exception)]
    if len(failures) > max_failure_rate * cfg.R:
        raise StudyAborted(f"{len(failures)} of {cfg.R} replicates failed; first: {failures[0][1]}")
    good = [x for x in results if not isinstance(x, Exception)]
    keys = [k for k in good[0] if k != "rule"]
    per_rep = {k: np.array([g[k] for g in good], dtype=float) for k in keys}
    rule = None
    if cfg.mfdr_target is not None:
        rule = {k: np.array([g["rule"][k] for g in good]) for k in good[0]["rule"]}
    return StudyResult(design, cfg, per_rep, failures, rule)


# -- presets ---------------------------------------------------------------------------

STUDY_GRID = tuple(float(x) for x in log_grid(1.0, 0.1, 100))

PRESETS: dict[str, SimDesign] = {
    "lowdim-ind": SimDesign(n=100, p=60, causative=6, m=2, rho_corr=0.5),
    "highdim-ind": SimDesign(n=100, p=600, causative=6, m=9, rho_corr=0.5),
    "ar-corr": SimDesign(n=100, p=500, causative=6, m=0, noise_structure="ar", noise_rho=0.8),
    "exch-corr": SimDesign(n=100, p=500, causative=6, m=0, noise_structure="exchangeable", noise_rho=0.8),
}


def preset(name: str, **overrides) -> SimDesign:
    try:
        d = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(d, **overrides) if overrides else d


# -- bivariate selection regions -------------------------------------------------------


def bivariate_lasso(z1: float, z2: float, rho: float, lam: float) -> np.ndarray:
    """Exact lasso solution for a 2-feature problem with Gram ``[[1, rho], [rho, 1]]``.

    Minimizes ``b'Gb/2 - z'b + lam*|b|_1`` by checking each support and sign
    pattern against the stationarity conditions.
    """
    if not abs(rho) < 1:
        raise ValueError("|rho| must be < 1")
    z = np.array([z1, z2], float)
    if abs(z1) <= lam and abs(z2) <= lam:
        return np.zeros(2)
    for j in (0, 1):
        o = 1 - j
        bj = np.sign(z[j]) * max(abs(z[j]) - lam, 0.0)
        if bj != 0 and abs(z[o] - rho * bj) <= lam:
            b = np.zeros(2)
            b[j] = bj
            return b
    det = 1 - rho**2
    for s1 in (1.0, -1.0):
        for s2 in (1.0, -1.0):
            c1, c2 = z1 - lam * s1, z2 - lam * s2
            b1, b2 = (c1 - rho * c2) / det, (c2 - rho * c1) / det
            if np.sign(b1) == s1 and np.sign(b2) == s2:
                return np.array([b1, b2])
    raise ArithmeticError("no stationary support found")  # unreachable for |rho| < 1


def bivariate_region_classify(z1: float, z2: float, rho: float, lam: float) -> tuple[int, int]:
    """``(exact selected count, orthogonal-approximation count)`` for ``z = X'y/n``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    exact = int(np.count_nonzero(bivariate_lasso(z1, z2, rho, lam)))
    approx = int(abs(z1) > lam) + int(abs(z2) > lam)
    return exact, approx


def bivariate_expected_counts(rho: float, lam: float, scale: float, draws: int, seed: int = 0):
    """Monte Carlo ``(E exact, E approx, se of difference)`` for ``z ~ N(0, scale^2 [[1,rho],[rho,1]])``."""
    rng = substream(seed)
    cov = scale**2 * np.array([[1.0, rho], [rho, 1.0]])
    Z = rng.multivariate_normal(np.zeros(2), cov, size=draws)
    counts = np.array([bivariate_region_classify(a, b, rho, lam) for a, b in Z])
    diff = counts[:, 1] - counts[:, 0]
    return counts[:, 0].mean(), counts[:, 1].mean(), diff.std(ddof=1) / math.sqrt(draws)
