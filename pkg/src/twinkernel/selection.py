"""Penalized level selection over the kernel hierarchy.

The criterion at level ``j`` is ``risk(j) + lambda * L(j) / n`` with code
lengths ``L`` satisfying (by default) the Kraft inequality; the smallest
minimizing level wins.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import LengthMismatchError, NegativeLevelError, ZeroDenominatorError
from .estimator import Dataset, EstimatorConfig, predict, predict_insample
from .kernel import TwinKernelHierarchy
from .space import MetricSpace

log = logging.getLogger(__name__)

SCHEMES = ("paper", "squared", "custom")
LAMBDA_RULES = ("fixed", "rice")
RISK_MODES = ("resubstitution", "loo")


@dataclass(frozen=True)
class CodeLengthScheme:
    """``paper``: ``log2(1+j) + 1``; ``squared``: ``2 log2(1+j) + 1``; ``custom``: ``func``."""

    kind: str = "squared"
    func: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown code-length scheme {self.kind!r}")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom scheme needs func")

    def __call__(self, j: int) -> float:
        return code_length(self, j)


def code_length(scheme: CodeLengthScheme, j: int) -> float:
    if j < 0:
        raise NegativeLevelError(f"level must be nonnegative, got {j}")
    if scheme.kind == "paper":
        return math.log2(1 + j) + 1.0
    if scheme.kind == "squared":
        return 2.0 * math.log2(1 + j) + 1.0
    return float(scheme.func(j))


def kraft_sum(scheme: CodeLengthScheme, levels: Sequence[int]) -> float:
    """``sum_j 2**-L(j)`` over distinct ``levels``."""
    levels = list(levels)
    if len(set(levels)) != len(levels):
        raise ValueError("levels must be distinct")
    return float(sum(2.0 ** -code_length(scheme, j) for j in levels))


def empirical_risk(data, fitted) -> float:
    ys = data.ys if isinstance(data, Dataset) else np.asarray(data, dtype=float)
    fitted = np.asarray(fitted, dtype=float)
    if fitted.shape != ys.shape:
        raise LengthMismatchError(f"{fitted.shape[0] if fitted.ndim else 1} fitted values for {ys.shape[0]} responses")
    r = ys - fitted
    return float(r @ r) / ys.shape[0]


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty constant; ``rice`` replaces ``lambda_`` by twice the difference-based noise variance."""

    lambda_: float = 1.0
    lambda_rule: str = "rice"

    def __post_init__(self):
        if not self.lambda_ > 0:
            raise ValueError("lambda must be positive")
        if self.lambda_rule not in LAMBDA_RULES:
            raise ValueError(f"unknown lambda rule {self.lambda_rule!r}")


def penalty(config: PenaltyConfig, n: int, L_j: float) -> float:
    if n < 1:
        raise ValueError("n must be positive")
    return config.lambda_ * L_j / n


def difference_variance(data: Dataset, space: MetricSpace | None = None) -> float:
    """Noise variance from squared response differences of neighbouring covariates.

    In one dimension these are consecutive pairs after sorting by ``x``;
    otherwise each point is paired with its nearest neighbour.
    """
    n = data.n
    if n < 2:
        return float("nan")
    if data.xs.shape[1] == 1:
        dy = np.diff(data.ys[np.argsort(data.xs[:, 0], kind="stable")])
        return float(dy @ dy) / (2 * (n - 1))
    p = np.inf if space is None or space.norm == "max" else 2
    boxsize = None
    if space is not None and space.periodic.all():
        boxsize = 1.0
    tree = cKDTree(data.xs, boxsize=boxsize)
    _, idx = tree.query(data.xs, k=2, p=p)
    dy = data.ys - data.ys[idx[:, 1]]
    return float(dy @ dy) / (2 * n)


def resolve_lambda(config: PenaltyConfig, data: Dataset, space: MetricSpace | None = None) -> float:
    """Penalty constant in use; the rice rule falls back to ``lambda_`` when the estimate is not positive."""
    if config.lambda_rule == "fixed":
        return config.lambda_
    s2 = difference_variance(data, space)
    lam = 2.0 * s2
    return float(lam) if np.isfinite(lam) and lam > 0 else config.lambda_


def index_set(n: int, c: float = 1.0) -> list[int]:
    """``{0, ..., floor(c * ln n)}``."""
    if n < 1 or not c > 0:
        raise ValueError("need n >= 1 and c > 0")
    return list(range(int(math.floor(c * math.log(n))) + 1))


def _num(x):
    return None if not np.isfinite(x) else float(x)


@dataclass
class SelectionTrace:
    levels: list
    bandwidths: list
    code_lengths: list
    risks: list
    penalties: list
    criteria: list
    j_hat: int
    lambda_: float
    kraft_sum: float
    risk_mode: str = "resubstitution"
    scheme: str = "squared"
    failed_levels: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "levels": list(self.levels),
            "bandwidths": [float(h) for h in self.bandwidths],
            "code_lengths": [float(x) for x in self.code_lengths],
            "risks": [_num(x) for x in self.risks],
            "penalties": [float(x) for x in self.penalties],
            "criteria": [_num(x) for x in self.criteria],
            "j_hat": int(self.j_hat),
            "lambda": float(self.lambda_),
            "kraft_sum": float(self.kraft_sum),
            "risk_mode": self.risk_mode,
            "scheme": self.scheme,
            "failed_levels": list(self.failed_levels),
            "warnings": list(self.warnings),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def rows(self) -> list[dict]:
        return [
            {"j": j, "h_j": h, "risk": r, "pen": p, "criterion": c}
            for j, h, r, p, c in zip(self.levels, self.bandwidths, self.risks, self.penalties, self.criteria)
        ]


def _smallest_argmin(levels, criteria):
    best = min(criteria)
    return min(j for j, c in zip(levels, criteria) if c == best)


def select_level(
    data: Dataset,
    hier: TwinKernelHierarchy,
    est_config: EstimatorConfig = EstimatorConfig(),
    pen_config: PenaltyConfig = PenaltyConfig(),
    scheme: CodeLengthScheme = CodeLengthScheme(),
    c: float = 1.0,
    risk: str = "resubstitution",
    levels: Sequence[int] | None = None,
) -> SelectionTrace:
    """Evaluate the penalized criterion on the index set and pick the smallest minimizer.

    ``risk="loo"`` scores each level by leave-one-out residuals instead of
    resubstitution.  Levels whose fitted values cannot be formed get infinite
    risk and are listed in ``failed_levels``.
    """
    if risk not in RISK_MODES:
        raise ValueError(f"unknown risk mode {risk!r}")
    n = data.n
    levels = index_set(n, c) if levels is None else sorted(int(j) for j in levels)
    levels = [j for j in levels if j <= hier.action.max_power]
    warnings = []
    ksum = kraft_sum(scheme, levels)
    if ksum > 1.0:
        msg = f"Kraft inequality violated: sum 2^-L(j) = {ksum:.6f} > 1 over {len(levels)} levels"
        log.warning(msg)
        warnings.append(msg)
    lam = resolve_lambda(pen_config, data, hier.space)
    fixed = replace(pen_config, lambda_=lam, lambda_rule="fixed")
    eta = est_config.eta(n)
    risks, pens, lengths, failed = [], [], [], []
    for j in levels:
        try:
            fitted = predict_insample(data, hier, j, est_config, loo=(risk == "loo"), eta=eta)
            r = empirical_risk(data, fitted)
        except ZeroDenominatorError:
            r = math.inf
            failed.append(j)
        L = code_length(scheme, j)
        lengths.append(L)
        risks.append(r)
        pens.append(penalty(fixed, n, L))
    crit = [r + p for r, p in zip(risks, pens)]
    if all(math.isinf(x) for x in crit):
        raise ZeroDenominatorError("fitted values could not be formed at any level")
    return SelectionTrace(
        levels=levels, bandwidths=[hier.bandwidth(j) for j in levels], code_lengths=lengths,
        risks=risks, penalties=pens, criteria=crit, j_hat=_smallest_argmin(levels, crit),
        lambda_=lam, kraft_sum=ksum, risk_mode=risk, scheme=scheme.kind,
        failed_levels=failed, warnings=warnings,
    )


@dataclass(frozen=True)
class Predictor:
    """The selected-level estimate as a callable on points."""

    data: Dataset
    hier: TwinKernelHierarchy
    level: int
    config: EstimatorConfig

    def __call__(self, points) -> np.ndarray:
        return predict(self.data, self.hier, self.level, points, self.config)


def fit_pipeline(
    data: Dataset,
    hier: TwinKernelHierarchy,
    est_config: EstimatorConfig = EstimatorConfig(),
    pen_config: PenaltyConfig = PenaltyConfig(),
    scheme: CodeLengthScheme = CodeLengthScheme(),
    c: float = 1.0,
    risk: str = "resubstitution",
    levels: Sequence[int] | None = None,
) -> tuple[SelectionTrace, Predictor]:
    trace = select_level(data, hier, est_config, pen_config, scheme, c, risk, levels)
    return trace, Predictor(data, hier, trace.j_hat, est_config)
