"""Population quantities and Monte Carlo experiments for the level selector.

Every experiment is driven by a :class:`Scenario`.  Replicate ``r`` at
sample size ``n`` draws its data from ``default_rng([seed, n, r])``, so
results do not depend on how replicates are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import space as sp
from .errors import ConfigError, DegenerateFitError
from .estimator import Dataset, EstimatorConfig, predict
from .kernel import BandwidthSchedule, BaseKernel, TwinKernelHierarchy, epanechnikov_kernel
from .selection import CodeLengthScheme, PenaltyConfig, code_length, fit_pipeline, index_set

DEN_FLOOR = 1e-12
DEFAULT_N_GRID = (256, 512, 1024, 2048, 4096, 8192)
DEFAULT_REPLICATES = 50
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


# ---------------------------------------------------------------------------
# targets, noise, design


@dataclass(frozen=True)
class TargetFunction:
    """Regression function on ``(n, d)`` points with optional known smoothness."""

    m: Callable[[np.ndarray], np.ndarray]
    name: str
    true_smoothness: float | None = None

    def __call__(self, pts) -> np.ndarray:
        return np.asarray(self.m(np.asarray(pts, dtype=float)), dtype=float).reshape(-1)

    def check_bounded(self, space: sp.MetricSpace) -> float:
        grid, _ = space.quad_grid()
        sup = float(np.max(np.abs(self(grid))))
        if not np.isfinite(sup):
            raise ValueError(f"target {self.name!r} is unbounded on the quadrature grid")
        return sup


def _tri(t):
    return np.abs(t - np.round(t))


def zigzag_1d(t, depth: int = 10):
    """Lipschitz, nowhere-smooth sum of ``2**-k * tri(2**k t)``; periodic with period 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    for k in range(depth):
        out += 2.0**-k * _tri(2.0**k * t)
    return out


def zigzag(depth: int = 10) -> TargetFunction:
    return TargetFunction(lambda p: zigzag_1d(p[:, 0], depth), "zigzag", 1.0)


def constant(value: float = 1.0) -> TargetFunction:
    return TargetFunction(lambda p: np.full(p.shape[0], float(value)), "constant", math.inf)


def sine() -> TargetFunction:
    return TargetFunction(lambda p: np.sin(2 * np.pi * p[:, 0]), "sine", 2.0)


def log_sine() -> TargetFunction:
    """``sin(2 pi log2 x)``: one period per dyadic shell of the half-line."""
    return TargetFunction(lambda p: np.sin(2 * np.pi * np.log2(p[:, 0])), "log_sine", 1.0)


def anisotropic_target() -> TargetFunction:
    """``zigzag(x1) + cos(pi x2)``: smoothness 1 along the first axis and 2 along the second."""
    return TargetFunction(
        lambda p: zigzag_1d(p[:, 0]) + np.cos(np.pi * p[:, 1]),
        "zigzag_plus_cos", harmonic_smoothness(1.0, 2.0),
    )


NOISE_LAWS = ("gaussian", "bounded_uniform")


@dataclass(frozen=True)
class NoiseSpec:
    """``gaussian``: N(0, sigma^2).  ``bounded_uniform``: U[-sigma, sigma].

    Both are sub-Gaussian with variance proxy ``sigma**2``.
    """

    sigma: float = 0.3
    law: str = "gaussian"

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.law not in NOISE_LAWS:
            raise ValueError(f"unknown noise law {self.law!r}")

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.law == "gaussian":
            return self.sigma * rng.standard_normal(n)
        return self.sigma * rng.uniform(-1.0, 1.0, n)


@dataclass(frozen=True)
class UniformDesign:
    """Uniform design over the carrier's bounds."""

    space: sp.MetricSpace

    def density(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[0], 1.0 / self.space.measure)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.space.sample_uniform(rng, n)


def simulate_dataset(space: sp.MetricSpace, design, m: TargetFunction, noise: NoiseSpec,
                     n: int, seed) -> Dataset:
    """Draw ``n`` pairs ``Y = m(X) + eps``; ``seed`` is anything ``default_rng`` accepts."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    xs = space.reduce(design.sample(rng, n))
    ys = m(xs) + noise.draw(rng, n)
    return Dataset(xs, ys)


# ---------------------------------------------------------------------------
# population smoothing and bias curves


@dataclass(frozen=True)
class PopulationSmooth:
    values: np.ndarray
    grid: np.ndarray
    weights: np.ndarray
    degenerate: np.ndarray

    @property
    def any_degenerate(self) -> bool:
        return bool(self.degenerate.any())


def population_mj(m: TargetFunction, hier: TwinKernelHierarchy, j: int, design_density=None,
                  grid_size: int | None = None) -> PopulationSmooth:
    """Design-weighted kernel average of ``m`` at level ``j`` on the quadrature grid.

    ``m_j(x) = sum_y K_j(x, y) m(y) p(y) w(y) / sum_y K_j(x, y) p(y) w(y)``.
    Grid points whose denominator is below ``1e-12`` are flagged and keep
    ``m(x)``.
    """
    space = hier.space
    g = space.grid_size if grid_size is None else int(grid_size)
    if g < 512:
        raise ValueError("population smoothing needs at least 512 grid points per axis")
    grid, w = space.quad_grid(g)
    mass = w if design_density is None else w * np.asarray(design_density(grid), dtype=float).reshape(-1)
    mg = m(grid)
    _, sv = hier.window_sums(j, grid, grid, np.column_stack([mass * mg, mass]))
    den = sv[:, 1]
    bad = den < DEN_FLOOR
    vals = np.where(bad, mg, sv[:, 0] / np.where(bad, 1.0, den))
    return PopulationSmooth(vals, grid, w, bad)


def twin_bias_curve(m: TargetFunction, hier: TwinKernelHierarchy, levels: Sequence[int],
                    design_density=None, grid_size: int | None = None) -> list[tuple[float, float]]:
    """``(h_j, ||m_j - m||_2)`` per level, norms taken against the reference measure."""
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least 3 levels")
    out = []
    for j in levels:
        ps = population_mj(m, hier, j, design_density, grid_size)
        if ps.any_degenerate:
            raise DegenerateFitError(f"level {j}: {int(ps.degenerate.sum())} grid points carry no kernel mass")
        err = ps.values - m(ps.grid)
        out.append((hier.bandwidth(j), float(np.sqrt(ps.weights @ (err * err)))))
    return out


def smoothness_exponent(bias_curve) -> float:
    """Least-squares slope of ``log norm`` against ``log h``; ``inf`` for an all-zero curve."""
    arr = np.asarray(bias_curve, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("bias curve must be a list of (h, norm) pairs")
    if np.all(arr[:, 1] <= 1e-12):
        return math.inf
    keep = arr[:, 1] > 1e-12
    if keep.sum() < 3:
        raise ValueError("need at least 3 nonzero norms")
    return float(np.polyfit(np.log(arr[keep, 0]), np.log(arr[keep, 1]), 1)[0])


def harmonic_smoothness(*indices: float) -> float:
    """``(sum_i 1/s_i)**-1``."""
    return 1.0 / sum(1.0 / s for s in indices)


def expected_slope(s: float, d_eff: float) -> float:
    """``-2s / (2s + d_eff)``, the parametric ``-1`` when ``s`` is infinite."""
    if math.isinf(s):
        return -1.0
    return -2.0 * s / (2.0 * s + d_eff)


# ---------------------------------------------------------------------------
# scenarios


@dataclass(frozen=True)
class Scenario:
    name: str
    space: sp.MetricSpace
    action: sp.GroupAction
    kernel: BaseKernel
    schedule: BandwidthSchedule
    target: TargetFunction
    noise: NoiseSpec
    d_eff: float
    est_config: EstimatorConfig = EstimatorConfig()
    pen_config: PenaltyConfig = PenaltyConfig()
    scheme: CodeLengthScheme = CodeLengthScheme()
    c: float = 1.0
    risk: str = "loo"
    x0: tuple[float, ...] = (0.5,)
    j_grid: tuple[int, ...] = (2, 3, 4, 5)
    overrides: tuple = ()
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    @property
    def hierarchy(self) -> TwinKernelHierarchy:
        if "hier" not in self._cache:
            self._cache["hier"] = TwinKernelHierarchy(self.kernel, self.schedule, self.action, self.space)
        return self._cache["hier"]

    @property
    def design(self) -> UniformDesign:
        return UniformDesign(self.space)

    def grid(self):
        """Quadrature nodes, weights and target values, computed once."""
        if "grid" not in self._cache:
            nodes, w = self.space.quad_grid()
            self._cache["grid"] = (nodes, w, self.target(nodes))
        return self._cache["grid"]

    @property
    def true_smoothness(self) -> float:
        s = self.target.true_smoothness
        return math.nan if s is None else float(s)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "space": {"kind": self.space.kind, "bounds": [list(b) for b in self.space.bounds],
                      "grid_size": self.space.grid_size, "norm": self.space.norm},
            "action": {"name": self.action.name, **self.action.params},
            "kernel": self.kernel.name,
            "h0": self.schedule.h0, "rho": self.schedule.rho, "dyadic": self.schedule.dyadic,
            "target": self.target.name, "sigma": self.noise.sigma, "noise_law": self.noise.law,
            "true_smoothness": None if math.isinf(self.true_smoothness) else self.true_smoothness,
            "d_eff": self.d_eff, "risk": self.risk, "scheme": self.scheme.kind,
            "lambda_rule": self.pen_config.lambda_rule, "c": self.c,
            "eta_rule": self.est_config.eta_rule, "degree": self.est_config.degree,
        }


def _classical_circle(**kw):
    return Scenario(
        "classical-circle", sp.circle(2048), sp.rotation(GOLDEN), epanechnikov_kernel(),
        BandwidthSchedule(1.0, 0.5), zigzag(), NoiseSpec(0.3), d_eff=1.0, **kw,
    )


def _orbit_constant(**kw):
    return Scenario(
        "orbit-constant", sp.circle(2048), sp.rotation(GOLDEN), epanechnikov_kernel(),
        BandwidthSchedule(1.0, 0.5), constant(1.0), NoiseSpec(0.3), d_eff=1.0, **kw,
    )


def _dilation_line(**kw):
    # phi^{-j} halves distances, so rho = 1/4 halves the effective bandwidth per level
    kw.setdefault("x0", (2.0,))
    return Scenario(
        "dilation-line", sp.positive_half_line(1.0, 4.0, 2048), sp.dilation(2.0), epanechnikov_kernel(),
        BandwidthSchedule(1.0, 0.25), log_sine(), NoiseSpec(0.3), d_eff=1.0, **kw,
    )


def _anisotropic_2d(**kw):
    # bandwidths 2^-j along x1 and 2^-j/2 along x2 balance biases of order 1 and 2
    kw.setdefault("x0", (0.5, 0.5))
    action = sp.product_action(sp.trivial(1), sp.dilation(math.sqrt(2.0)))
    return Scenario(
        "anisotropic-2d", sp.box([(0.0, 1.0), (0.0, 1.0)], grid_size=256), action, epanechnikov_kernel(),
        BandwidthSchedule(1.0, 0.5), anisotropic_target(), NoiseSpec(0.3), d_eff=1.0, **kw,
    )


SCENARIOS = {
    "classical-circle": _classical_circle,
    "orbit-constant": _orbit_constant,
    "dilation-line": _dilation_line,
    "anisotropic-2d": _anisotropic_2d,
}

OVERRIDABLE = ("sigma", "noise_law", "risk", "scheme", "lambda_rule", "lambda", "c", "eta_rule", "degree")


def get_scenario(name: str, **overrides) -> Scenario:
    """Built-in scenario by name.

    ``overrides`` may set ``sigma``, ``noise_law``, ``risk``, ``scheme``,
    ``lambda_rule``, ``lambda``, ``c``, ``eta_rule`` and ``degree``.
    """
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; expected one of {sorted(SCENARIOS)}")
    return _build(name, tuple(sorted(overrides.items())))


@lru_cache(maxsize=32)
def _build(name, items):
    ov = dict(items)
    unknown = set(ov) - set(OVERRIDABLE)
    if unknown:
        raise ConfigError(f"unknown scenario overrides {sorted(unknown)}")
    sc = SCENARIOS[name]()
    noise = NoiseSpec(ov.get("sigma", sc.noise.sigma), ov.get("noise_law", sc.noise.law))
    pen = PenaltyConfig(ov.get("lambda", sc.pen_config.lambda_), ov.get("lambda_rule", sc.pen_config.lambda_rule))
    est = replace(sc.est_config, eta_rule=ov.get("eta_rule", sc.est_config.eta_rule),
                  degree=ov.get("degree", sc.est_config.degree))
    return replace(sc, noise=noise, pen_config=pen, est_config=est,
                   scheme=CodeLengthScheme(ov.get("scheme", sc.scheme.kind)),
                   risk=ov.get("risk", sc.risk), c=ov.get("c", sc.c), overrides=items)


# ---------------------------------------------------------------------------
# replicate runner


def replicate_seed(seed: int, n: int, rep: int) -> list[int]:
    return [int(seed), int(n), int(rep)]


def run_replicate(sc: Scenario, n: int, rep: int, seed: int) -> dict:
    """One full pipeline run; returns the selected level, errors and the level trace."""
    data = simulate_dataset(sc.space, sc.design, sc.target, sc.noise, n, replicate_seed(seed, n, rep))
    trace, pred = fit_pipeline(data, sc.hierarchy, sc.est_config, sc.pen_config, sc.scheme, sc.c, sc.risk)
    nodes, w, mg = sc.grid()
    err = pred(nodes) - mg
    return {
        "n": n, "rep": rep, "j_hat": trace.j_hat,
        "ise": float(w @ (err * err)), "sup": float(np.max(np.abs(err))),
        "levels": trace.levels, "risks": trace.risks, "penalties": trace.penalties,
        "criteria": trace.criteria, "lambda": trace.lambda_,
    }


def _job(args):
    name, items, n, rep, seed = args
    return run_replicate(_build(name, items), n, rep, seed)


def run_replicates(sc: Scenario, n: int, replicates: int, seed: int, jobs: int = 1) -> list[dict]:
    """Replicates ``0 .. replicates-1`` in index order, optionally over ``jobs`` processes."""
    if jobs <= 1:
        return [run_replicate(sc, n, r, seed) for r in range(replicates)]
    if sc.name not in SCENARIOS or _build(sc.name, sc.overrides) is not sc:
        raise ConfigError("parallel runs need a scenario obtained from get_scenario")
    tasks = [(sc.name, sc.overrides, n, r, seed) for r in range(replicates)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_job, tasks, chunksize=max(1, replicates // (4 * jobs))))


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan
    return float(v.mean()), se


def mise_experiment(sc: Scenario, n: int, replicates: int = DEFAULT_REPLICATES, seed: int = 0,
                    jobs: int = 1, records: list | None = None) -> tuple[float, float]:
    """Mean and standard error of the integrated squared error over replicates."""
    if replicates < 20:
        raise ValueError("need at least 20 replicates")
    recs = run_replicates(sc, n, replicates, seed, jobs)
    if records is not None:
        records.extend(recs)
    return _mean_se([r["ise"] for r in recs])


@dataclass
class RateFit:
    n_grid: list
    mise: list
    mise_se: list
    slope: float
    slope_se: float
    expected_slope: float
    intercept: float = math.nan
    sup_error: list | None = None
    j_hat_counts: list | None = None
    true_smoothness: float | None = None
    d_eff: float | None = None

    def to_dict(self) -> dict:
        return {
            "n_grid": list(self.n_grid), "mise": list(self.mise), "mise_se": list(self.mise_se),
            "slope": self.slope, "slope_se": self.slope_se, "expected_slope": self.expected_slope,
            "intercept": self.intercept, "sup_error": self.sup_error, "j_hat_counts": self.j_hat_counts,
            "true_smoothness": None if self.true_smoothness is None or math.isinf(self.true_smoothness)
            else self.true_smoothness,
            "d_eff": self.d_eff,
        }

    def plot_rows(self) -> list[dict]:
        """``n, mise, se, fitted`` with the fitted line ``exp(intercept) * n**slope``."""
        return [
            {"n": n, "mise": m, "se": s, "fitted": math.exp(self.intercept) * n**self.slope}
            for n, m, s in zip(self.n_grid, self.mise, self.mise_se)
        ]


def fit_rate(n_grid, mise, se=None, expected: float = math.nan) -> RateFit:
    """Weighted least-squares slope of ``log mise`` on ``log n``.

    Weights are ``(mise / se)**2``, the inverse delta-method variances of
    ``log mise``; without usable standard errors the fit is unweighted.
    """
    n = np.asarray(n_grid, dtype=float)
    y = np.asarray(mise, dtype=float)
    if np.any(np.diff(n) <= 0):
        raise ValueError("n_grid must be strictly increasing")
    if np.any(y <= 0):
        raise ValueError("mise values must be positive")
    s = None if se is None else np.asarray(se, dtype=float)
    if s is not None and np.all(np.isfinite(s)) and np.all(s > 0):
        wts = (y / s) ** 2
    else:
        wts = np.ones_like(y)
    X = np.column_stack([np.ones_like(n), np.log(n)])
    A = X.T @ (wts[:, None] * X)
    beta = np.linalg.solve(A, X.T @ (wts * np.log(y)))
    cov = np.linalg.inv(A)
    if np.all(wts == 1):
        resid = np.log(y) - X @ beta
        cov = cov * float(resid @ resid) / max(len(y) - 2, 1)
    return RateFit(
        n_grid=[int(v) for v in n], mise=[float(v) for v in y],
        mise_se=[] if s is None else [float(v) for v in s],
        slope=float(beta[1]), slope_se=float(np.sqrt(cov[1, 1])), expected_slope=float(expected),
        intercept=float(beta[0]),
    )


def rate_experiment(sc: Scenario, n_grid: Sequence[int] = DEFAULT_N_GRID,
                    replicates: int = DEFAULT_REPLICATES, seed: int = 0, jobs: int = 1,
                    records: list | None = None) -> RateFit:
    """MISE per sample size and the fitted log-log slope.

    The expected slope uses the scenario's declared smoothness and
    effective dimension.  Mean sup-norm errors and selected-level counts are
    recorded from the same replicates.
    """
    n_grid = [int(v) for v in n_grid]
    if len(n_grid) < 5:
        raise ValueError("rate fits need at least 5 sample sizes")
    means, ses, sups, counts = [], [], [], []
    for n in n_grid:
        recs = run_replicates(sc, n, replicates, seed, jobs)
        if records is not None:
            records.extend(recs)
        m, s = _mean_se([r["ise"] for r in recs])
        means.append(m)
        ses.append(s)
        sups.append(float(np.mean([r["sup"] for r in recs])))
        js = np.array([r["j_hat"] for r in recs])
        counts.append(np.bincount(js, minlength=max(index_set(n, sc.c)) + 1).tolist())
    fit = fit_rate(n_grid, means, ses, expected_slope(sc.true_smoothness, sc.d_eff))
    fit.sup_error = sups
    fit.j_hat_counts = counts
    fit.true_smoothness = sc.true_smoothness
    fit.d_eff = sc.d_eff
    return fit


def uniform_error_experiment(sc: Scenario, n_grid: Sequence[int] = DEFAULT_N_GRID,
                             replicates: int = DEFAULT_REPLICATES, seed: int = 0,
                             jobs: int = 1) -> list[float]:
    """Mean sup-norm error over the quadrature grid for each sample size."""
    return [float(np.mean([r["sup"] for r in run_replicates(sc, int(n), replicates, seed, jobs)]))
            for n in n_grid]


@dataclass
class OracleReport:
    n: int
    levels: list
    bias2: list
    penalty_terms: list
    oracle_value: float
    achieved_risk: float
    achieved_se: float
    ratio: float
    sigma: float

    def to_dict(self) -> dict:
        return {
            "n": self.n, "levels": list(self.levels), "bias2": list(self.bias2),
            "penalty_terms": list(self.penalty_terms), "oracle_value": self.oracle_value,
            "achieved_risk": self.achieved_risk, "achieved_se": self.achieved_se,
            "ratio": self.ratio, "sigma": self.sigma,
        }


def oracle_experiment(sc: Scenario, n: int, replicates: int = DEFAULT_REPLICATES, seed: int = 0,
                      jobs: int = 1, records: list | None = None) -> OracleReport:
    """Achieved MISE against ``min_j ||m_j - m||^2 + sigma^2 L(j) / n``.

    The oracle uses the scenario's true noise level; the estimator still
    sets its own penalty constant.
    """
    levels = index_set(n, sc.c)
    sigma2 = sc.noise.sigma**2
    bias2, pens = [], []
    for j in levels:
        ps = population_mj(sc.target, sc.hierarchy, j, sc.design.density)
        err = ps.values - sc.target(ps.grid)
        bias2.append(float(ps.weights @ (err * err)))
        pens.append(sigma2 * code_length(sc.scheme, j) / n)
    oracle = float(min(b + p for b, p in zip(bias2, pens)))
    achieved, se = mise_experiment(sc, n, replicates, seed, jobs, records)
    den = oracle + sigma2 / n
    ratio = achieved / den if den > 0 else math.inf
    return OracleReport(n, levels, bias2, pens, oracle, achieved, se, float(ratio), sc.noise.sigma)


# ---------------------------------------------------------------------------
# pointwise experiments


def _point_estimates(sc: Scenario, j_grid, n, replicates, seed):
    """Level-``j`` estimates at ``x0`` and their design-conditional means, per replicate."""
    hier = sc.hierarchy
    x0 = np.asarray(sc.x0, dtype=float).reshape(1, -1)
    est = np.empty((replicates, len(j_grid)))
    cond = np.empty((replicates, len(j_grid)))
    for r in range(replicates):
        data = simulate_dataset(sc.space, sc.design, sc.target, sc.noise, n, replicate_seed(seed, n, r))
        clean = Dataset(data.xs, sc.target(data.xs))
        eta = sc.est_config.eta(n)
        for a, j in enumerate(j_grid):
            est[r, a] = predict(data, hier, j, x0, sc.est_config, eta)[0]
            cond[r, a] = predict(clean, hier, j, x0, sc.est_config, eta)[0]
    return est, cond


@dataclass
class VarianceReport:
    levels: list
    bandwidths: list
    variances: list
    slope: float | None
    skipped: bool
    n: int
    replicates: int

    def to_dict(self) -> dict:
        return {"levels": self.levels, "bandwidths": self.bandwidths, "variances": self.variances,
                "slope": self.slope, "skipped": self.skipped, "n": self.n, "replicates": self.replicates}


def variance_scaling_experiment(sc: Scenario, j_grid: Sequence[int] | None = None, n: int = 2048,
                                replicates: int = 200, seed: int = 0) -> VarianceReport:
    """Monte Carlo variance of the level-``j`` estimate at ``sc.x0`` and its log-log slope in ``h_j``.

    Noise-free scenarios skip the slope fit and set ``skipped``.
    """
    j_grid = list(sc.j_grid if j_grid is None else j_grid)
    if len(j_grid) < 4:
        raise ValueError("need at least 4 levels")
    est, _ = _point_estimates(sc, j_grid, n, replicates, seed)
    var = est.var(axis=0, ddof=1)
    hs = [sc.hierarchy.bandwidth(j) for j in j_grid]
    skipped = sc.noise.sigma == 0
    slope = None if skipped else float(np.polyfit(np.log(hs), np.log(var), 1)[0])
    return VarianceReport(j_grid, hs, [float(v) for v in var], slope, skipped, n, replicates)


@dataclass
class TailReport:
    thresholds: list
    frequencies: list
    envelope: list
    sd: float
    C: float

    def to_dict(self) -> dict:
        return {"thresholds": self.thresholds, "frequencies": self.frequencies,
                "envelope": self.envelope, "sd": self.sd, "C": self.C}


def tail_check(sc: Scenario, j: int, n: int, replicates: int, thresholds: Sequence[float],
               seed: int = 0) -> TailReport:
    """Exceedance frequencies of ``|m_hat_j(x0) - E[m_hat_j(x0) | X]|``.

    The Gaussian envelope ``exp(-n h^d t^2 / (C sigma^2))`` fixes ``C`` from
    the empirical deviation variance.  Informational only.
    """
    if replicates < 500:
        raise ValueError("need at least 500 replicates")
    est, cond = _point_estimates(sc, [j], n, replicates, seed)
    dev = np.abs(est[:, 0] - cond[:, 0])
    sd = float(np.sqrt(np.mean(dev * dev)))
    t = np.asarray(thresholds, dtype=float)
    if np.any(t < 0):
        raise ValueError("thresholds must be nonnegative")
    freq = [float(np.mean(dev >= v)) if v == 0 else float(np.mean(dev > v)) for v in t]
    h = sc.hierarchy.bandwidth(j)
    sigma2 = sc.noise.sigma**2
    scale = n * h**sc.d_eff
    C = 2.0 * sd * sd * scale / sigma2 if sigma2 > 0 and sd > 0 else math.inf
    env = [float(math.exp(-scale * v * v / (C * sigma2))) if np.isfinite(C) else 1.0 for v in t]
    return TailReport([float(v) for v in t], freq, env, sd, float(C))


def anisotropic_experiment(n_grid: Sequence[int] = DEFAULT_N_GRID, replicates: int = DEFAULT_REPLICATES,
                           seed: int = 0, jobs: int = 1, records: list | None = None) -> RateFit:
    """Rate fit for the two-axis scenario; expected slope from the harmonic-mean smoothness."""
    return rate_experiment(get_scenario("anisotropic-2d"), n_grid, replicates, seed, jobs, records)
