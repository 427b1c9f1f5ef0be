"""Base kernel profiles, bandwidth schedules and the transported kernel hierarchy.

Profiles act on normalized distances ``u = d / h`` and vanish for ``u > 1``.
The level-``j`` kernel transports both points by ``phi^{-j}`` before taking
the carrier distance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _engine
from .errors import NegativeLevelError
from .space import GroupAction, MetricSpace, _as_points

KERNEL_NAMES = ("box", "triangular", "epanechnikov", "custom")


@dataclass(frozen=True)
class BaseKernel:
    """Radial profile ``K(u)`` on ``u >= 0``.

    ``coeffs`` (ascending powers of ``u``) marks a polynomial profile on
    ``[0, 1]``; such kernels run through the compiled summation engine.
    Kernels built from an arbitrary callable use a vectorized fallback.
    """

    name: str
    profile: Callable[[np.ndarray], np.ndarray]
    lipschitz_hint: float | None = None
    coeffs: tuple[float, ...] | None = None

    def __call__(self, u):
        return self.profile(np.asarray(u, dtype=float))

    @property
    def at_zero(self) -> float:
        return float(self.profile(np.zeros(1))[0])


def polynomial_kernel(coeffs, name: str = "custom", lipschitz_hint: float | None = None) -> BaseKernel:
    """Profile ``sum_k coeffs[k] * u**k`` on ``[0, 1]``, zero elsewhere."""
    coeffs = tuple(float(c) for c in coeffs)
    if not coeffs:
        raise ValueError("polynomial kernel needs at least one coefficient")
    poly = np.polynomial.Polynomial(coeffs)

    def profile(u):
        u = np.asarray(u, dtype=float)
        return np.where((u >= 0.0) & (u <= 1.0), poly(u), 0.0)

    return BaseKernel(name, profile, lipschitz_hint, coeffs)


def box_kernel() -> BaseKernel:
    return polynomial_kernel([1.0], name="box")


def triangular_kernel() -> BaseKernel:
    return polynomial_kernel([2.0, -2.0], name="triangular", lipschitz_hint=2.0)


def epanechnikov_kernel() -> BaseKernel:
    return polynomial_kernel([1.5, 0.0, -1.5], name="epanechnikov", lipschitz_hint=3.0)


def make_kernel(name: str, coeffs=None) -> BaseKernel:
    builders = {"box": box_kernel, "triangular": triangular_kernel, "epanechnikov": epanechnikov_kernel}
    if name == "custom":
        if coeffs is None:
            raise ValueError("custom kernels need polynomial coefficients")
        return polynomial_kernel(coeffs)
    if name not in builders:
        raise ValueError(f"unknown kernel {name!r}; expected one of {KERNEL_NAMES}")
    return builders[name]()


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    value: float
    detail: str

    def to_dict(self):
        return {"passed": self.passed, "value": self.value, "detail": self.detail}


@dataclass(frozen=True)
class KernelValidation:
    kernel: str
    K1: CheckResult
    K2: CheckResult
    K3: CheckResult
    K4: CheckResult

    @property
    def essential_ok(self) -> bool:
        return self.K1.passed and self.K2.passed and self.K3.passed

    @property
    def all_ok(self) -> bool:
        return self.essential_ok and self.K4.passed

    def to_dict(self):
        return {"kernel": self.kernel, **{k: getattr(self, k).to_dict() for k in ("K1", "K2", "K3", "K4")}}


def _max_slope(kernel, size):
    u = np.linspace(0.0, 1.5, size + 1)
    return float(np.max(np.abs(np.diff(kernel(u))) / (u[1] - u[0])))


def validate_kernel(kernel: BaseKernel, grid_size: int = 1024) -> KernelValidation:
    """Check boundedness, support, unit mass and Lipschitz continuity on grids.

    Without a Lipschitz hint, K4 passes when the maximal finite-difference
    slope stays put as the grid is refined (a jump makes it grow with the
    resolution).
    """
    if grid_size < 256:
        raise ValueError("grid_size must be at least 256")
    dense = np.linspace(0.0, 2.0, 2 * grid_size + 1)
    vals = kernel(dense)
    sup = float(np.max(np.abs(vals)))
    nonneg = bool(np.all(vals >= 0))
    k1 = CheckResult(bool(np.isfinite(sup)) and nonneg, sup,
                     "sup |K| on [0, 2]" + ("" if nonneg else "; profile takes negative values"))

    outside = np.linspace(1.0, 2.0, grid_size + 1)[1:]
    leak = float(np.max(np.abs(kernel(outside))))
    k2 = CheckResult(leak == 0.0, leak, "max |K(u)| for u in (1, 2]")

    nodes, w = np.polynomial.legendre.leggauss(8)
    edges = np.linspace(0.0, 1.0, grid_size + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    mass = float(np.sum(half[:, None] * w[None, :] * kernel(mid[:, None] + half[:, None] * nodes[None, :])))
    k3 = CheckResult(abs(mass - 1.0) <= 1e-6, mass, "integral of K over [0, 1]")

    coarse = _max_slope(kernel, grid_size)
    fine = _max_slope(kernel, 2 * grid_size)
    if kernel.lipschitz_hint is not None:
        ok = max(coarse, fine) <= kernel.lipschitz_hint * (1 + 1e-9)
        detail = f"max finite-difference slope vs hint {kernel.lipschitz_hint}"
    else:
        ok = fine <= 1.5 * coarse
        detail = "max finite-difference slope stable under grid refinement"
    k4 = CheckResult(bool(ok), max(coarse, fine), detail)
    return KernelValidation(kernel.name, k1, k2, k3, k4)


@dataclass(frozen=True)
class BandwidthSchedule:
    """Geometric bandwidths ``h0 * rho**j``, or ``2**-j`` in dyadic mode."""

    h0: float = 1.0
    rho: float = 0.5
    dyadic: bool = False

    def __post_init__(self):
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")
        if not 0 < self.rho < 1:
            raise ValueError("rho must lie in (0, 1)")

    def __call__(self, j: int) -> float:
        return bandwidth(self, j)


def bandwidth(schedule: BandwidthSchedule, j: int) -> float:
    if j < 0:
        raise NegativeLevelError(f"level must be nonnegative, got {j}")
    if schedule.dyadic:
        return 2.0 ** (-j)
    return schedule.h0 * schedule.rho**j


@dataclass(frozen=True)
class TwinKernelHierarchy:
    base: BaseKernel
    schedule: BandwidthSchedule
    action: GroupAction
    space: MetricSpace
    _coeffs: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.action.dim != self.space.dim:
            raise ValueError("action and space dimensions differ")
        if self.base.coeffs is not None:
            object.__setattr__(self, "_coeffs", np.asarray(self.base.coeffs, dtype=float))

    def bandwidth(self, j: int) -> float:
        return bandwidth(self.schedule, j)

    def transport(self, j: int, pts) -> np.ndarray:
        """Points moved by ``phi^{-j}``, circle coordinates re-wrapped."""
        if j < 0:
            raise NegativeLevelError(f"level must be nonnegative, got {j}")
        self.action.check_power(j)
        pts = _as_points(pts, self.space.dim)
        moved = pts if j == 0 else self.action.powers(-int(j), pts)
        return self.space.reduce(moved)

    def window_sums(self, j: int, queries, data, values):
        """Kernel sums at ``queries`` over ``data`` with ``values`` of shape ``(n, p)``.

        Returns ``(S0, SV)`` as in the compiled engine, in query order.
        """
        h = self.bandwidth(j)
        tq = self.transport(j, queries)
        td = self.transport(j, data)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if self._coeffs is None:
            return self._dense_sums(tq, td, values, h)
        order, td_sorted = _engine.sort_by_first(td)
        periods = self.space.periodic.astype(float)
        if self.space.dim == 1 and self._coeffs.shape[0] <= _engine.FAST_COEFFS:
            return _engine.window_sums_1d(tq, td_sorted, values[order], h, self._coeffs, periods[0])
        return _engine.window_sums(
            np.ascontiguousarray(tq), td_sorted, np.ascontiguousarray(values[order]),
            float(h), self._coeffs, periods, self.space.norm == "euclidean",
        )

    def _dense_sums(self, tq, td, values, h, chunk=512):
        s0 = np.empty(tq.shape[0])
        sv = np.empty((tq.shape[0], values.shape[1]))
        for start in range(0, tq.shape[0], chunk):
            w = self.base(self.space.distance(tq[start : start + chunk, None, :], td[None, :, :]) / h)
            s0[start : start + chunk] = w.sum(axis=1)
            sv[start : start + chunk] = w @ values
        return s0, sv

    def weights(self, j: int, x, data) -> np.ndarray:
        """Row of kernel values ``K_j(x, X_i)`` for a single point ``x``."""
        tx = self.transport(j, x)
        td = self.transport(j, data)
        return self.base(self.space.distance(tx[0], td) / self.bandwidth(j))

    def support_counts(self, j: int, queries, data) -> np.ndarray:
        h = self.bandwidth(j)
        tq = self.transport(j, queries)
        _, td = _engine.sort_by_first(self.transport(j, data))
        return _engine.support_counts(
            np.ascontiguousarray(tq), td, float(h), self.space.periodic.astype(float),
            self.space.norm == "euclidean",
        )


def twin_kernel_eval(hier: TwinKernelHierarchy, j: int, x, y) -> float:
    """``K(d(phi^{-j} x, phi^{-j} y) / h_j)``."""
    tx = hier.transport(j, x)
    ty = hier.transport(j, y)
    return float(np.ravel(hier.base(hier.space.distance(tx[0], ty[0]) / hier.bandwidth(j)))[0])


def gram_matrix(hier: TwinKernelHierarchy, j: int, points) -> np.ndarray:
    """Level-``j`` Gram matrix; the upper triangle is computed once and mirrored."""
    tp = hier.transport(j, points)
    n = tp.shape[0]
    iu, ju = np.triu_indices(n)
    vals = hier.base(hier.space.distance(tp[iu], tp[ju]) / hier.bandwidth(j))
    g = np.empty((n, n))
    g[iu, ju] = vals
    g[ju, iu] = vals
    return g
