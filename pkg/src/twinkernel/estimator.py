"""Level-j regression estimators: regularized Nadaraya-Watson and local polynomials."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatchError, ZeroDenominatorError
from .kernel import TwinKernelHierarchy
from .space import MetricSpace, _as_points

ETA_RULES = ("inverse_square", "fixed", "zero")
COND_LIMIT = 1e12


@dataclass(frozen=True)
class Dataset:
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        if xs.ndim == 1:
            xs = xs.reshape(-1, 1)
        ys = np.asarray(self.ys, dtype=float).reshape(-1)
        if xs.shape[0] != ys.shape[0]:
            raise LengthMismatchError(f"{xs.shape[0]} covariates but {ys.shape[0]} responses")
        if ys.shape[0] < 1:
            raise ValueError("dataset needs at least one observation")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return int(self.ys.shape[0])

    def check_carrier(self, space: MetricSpace) -> None:
        if self.xs.shape[1] != space.dim:
            raise ValueError(f"covariates have dimension {self.xs.shape[1]}, space has {space.dim}")
        if not np.all(space.contains(self.xs)):
            raise ValueError("covariates outside the carrier")


@dataclass(frozen=True)
class EstimatorConfig:
    """``eta_rule``: ``inverse_square`` (``n**-2``), ``fixed`` (``eta_value``) or ``zero``."""

    eta_rule: str = "inverse_square"
    eta_value: float = 0.0
    degree: int = 0
    ridge: float = 1e-10

    def __post_init__(self):
        if self.eta_rule not in ETA_RULES:
            raise ValueError(f"unknown eta rule {self.eta_rule!r}")
        if not 0 <= self.degree <= 5:
            raise ValueError("degree must lie in 0..5")
        if self.ridge < 0 or self.eta_value < 0:
            raise ValueError("ridge and eta_value must be nonnegative")

    def eta(self, n: int) -> float:
        if self.eta_rule == "inverse_square":
            return float(n) ** -2
        if self.eta_rule == "fixed":
            return float(self.eta_value)
        return 0.0


def _ratio(s0, s1, eta):
    den = s0 + eta
    if np.any(den == 0):
        raise ZeroDenominatorError("no observation in the kernel support and eta = 0")
    return s1 / den


def _shape_like(values, x, dim):
    if np.ndim(x) == 0 or (dim > 1 and np.ndim(x) == 1):
        return float(values[0])
    return values


def nw_estimate(data: Dataset, hier: TwinKernelHierarchy, j: int, x, eta: float):
    """``sum_i K_j(x, X_i) Y_i / (sum_i K_j(x, X_i) + eta)`` at one or many points."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    pts = _as_points(x, hier.space.dim)
    s0, sv = hier.window_sums(j, pts, data.xs, data.ys)
    return _shape_like(_ratio(s0, sv[:, 0], eta), x, hier.space.dim)


def nw_weights(data: Dataset, hier: TwinKernelHierarchy, j: int, x, eta: float) -> np.ndarray:
    """Weights ``w_i(x)`` of the estimate at a single point."""
    k = hier.weights(j, x, data.xs)
    den = k.sum() + eta
    if den == 0:
        raise ZeroDenominatorError("no observation in the kernel support and eta = 0")
    return k / den


def _exponents(dim, degree):
    out = []
    for total in range(degree + 1):
        for combo in itertools.combinations_with_replacement(range(dim), total):
            e = [0] * dim
            for a in combo:
                e[a] += 1
            out.append(tuple(e))
    return np.array(out, dtype=int)


def _local_fit(w, offsets, y, degree, eta, ridge):
    """Constant term of the weighted polynomial fit, lowering the degree on rank loss."""
    for r in range(degree, 0, -1):
        expo = _exponents(offsets.shape[1], r)
        if np.count_nonzero(w) < expo.shape[0]:
            continue
        basis = np.prod(offsets[:, None, :] ** expo[None, :, :], axis=2)
        gram = basis.T @ (w[:, None] * basis)
        if not np.all(np.isfinite(gram)) or np.linalg.cond(gram) > COND_LIMIT:
            continue
        pen = np.full(expo.shape[0], ridge)
        pen[0] = eta
        coef = np.linalg.solve(gram + np.diag(pen), basis.T @ (w * y))
        return float(coef[0])
    den = w.sum() + eta
    if den == 0:
        raise ZeroDenominatorError("no observation in the kernel support and eta = 0")
    return float(w @ y / den)


def local_poly_estimate(data: Dataset, hier: TwinKernelHierarchy, j: int, x,
                        config: EstimatorConfig, eta: float | None = None, exclude=None):
    """Weighted polynomial fit in transported offsets; returns the intercept.

    Offsets are ``phi^{-j} X_i - phi^{-j} x`` scaled by ``h_j``.  The
    regularization ``eta`` (default ``config.eta(n)``) acts on the intercept
    and ``config.ridge`` on the other coefficients.  ``exclude`` drops one
    observation index per query (leave-one-out).
    """
    eta = config.eta(data.n) if eta is None else eta
    space = hier.space
    pts = _as_points(x, space.dim)
    h = hier.bandwidth(j)
    td = hier.transport(j, data.xs)
    tq = hier.transport(j, pts)
    out = np.empty(pts.shape[0])
    for a in range(pts.shape[0]):
        w = hier.base(space.distance(tq[a], td) / h)
        if exclude is not None:
            w = w.copy()
            w[exclude[a]] = 0.0
        idx = np.flatnonzero(w)
        offsets = space.axis_offsets(tq[a], td[idx]) / h
        out[a] = _local_fit(w[idx], offsets, data.ys[idx], config.degree, eta, config.ridge)
    return _shape_like(out, x, space.dim)


def predict(data: Dataset, hier: TwinKernelHierarchy, j: int, points, config: EstimatorConfig,
            eta: float | None = None) -> np.ndarray:
    """Level-``j`` estimate at ``points`` (an ``(m, d)`` array or flat 1-D array)."""
    eta = config.eta(data.n) if eta is None else eta
    pts = _as_points(points, hier.space.dim)
    if config.degree == 0:
        s0, sv = hier.window_sums(j, pts, data.xs, data.ys)
        return _ratio(s0, sv[:, 0], eta)
    return np.asarray(local_poly_estimate(data, hier, j, pts, config, eta))


def predict_insample(data: Dataset, hier: TwinKernelHierarchy, j: int, config: EstimatorConfig,
                     loo: bool = False, eta: float | None = None) -> np.ndarray:
    """Fitted values at the design points from the full sample.

    ``loo=True`` drops each observation from its own fit.
    """
    eta = config.eta(data.n) if eta is None else eta
    if config.degree > 0:
        exclude = np.arange(data.n) if loo else None
        return np.asarray(local_poly_estimate(data, hier, j, data.xs, config, eta, exclude))
    s0, sv = hier.window_sums(j, data.xs, data.xs, data.ys)
    s1 = sv[:, 0]
    if loo:
        k0 = hier.base.at_zero
        s0 = s0 - k0
        s1 = s1 - k0 * data.ys
        # cancellation residue when only the point itself was in its window
        alone = np.abs(s0) < 1e-12 * k0
        s0[alone] = 0.0
        s1[alone] = 0.0
    return _ratio(s0, s1, eta)
