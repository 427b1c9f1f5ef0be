"""Metric carriers, cyclic group actions, orbits and orbit-size diagnostics.

Points are handled as float arrays of shape ``(n, d)``.  Public helpers also
accept scalars and flat arrays for one-dimensional carriers and hand back the
same shape they were given.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateFitError,
    EmptyInputError,
    PowerOverflowError,
    ZeroMassError,
)

AXIS_KINDS = ("circle", "line", "half_line")
SPACE_KINDS = ("circle", "real_line", "positive_half_line", "box_in_Rd", "product")


def _as_points(x, dim):
    """Coerce ``x`` to an ``(n, dim)`` float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        return arr.reshape(1, 1)
    if arr.ndim == 1:
        if dim == 1:
            return arr.reshape(-1, 1)
        if arr.shape[0] == dim:
            return arr.reshape(1, dim)
    if arr.ndim == 2 and arr.shape[1] == dim:
        return arr
    raise ValueError(f"cannot interpret array of shape {arr.shape} as points of dimension {dim}")


def _restore(points, like, dim):
    """Return ``points`` in the layout of the user-supplied ``like``."""
    like = np.asarray(like)
    if like.ndim == 0:
        return float(points[0, 0]) if dim == 1 else points[0]
    if like.ndim == 1 and dim == 1:
        return points[:, 0]
    if like.ndim == 1:
        return points[0]
    return points


@dataclass(frozen=True)
class MetricSpace:
    """A carrier set with metric, reference measure and quadrature grid.

    Each axis is a circle ``[0, 1)`` with wraparound, the real line, or the
    open positive half-line.  ``bounds`` is the region on which the design and
    the reference measure live; per-axis distances are combined with ``norm``
    (``"max"`` or ``"euclidean"``).
    """

    kind: str
    axes: tuple[str, ...]
    bounds: tuple[tuple[float, float], ...]
    norm: str = "max"
    grid_size: int = 2048

    def __post_init__(self):
        if self.kind not in SPACE_KINDS:
            raise ValueError(f"unknown space kind {self.kind!r}")
        if len(self.axes) != len(self.bounds) or not self.axes:
            raise ValueError("axes and bounds must be nonempty and of equal length")
        for ax, (lo, hi) in zip(self.axes, self.bounds):
            if ax not in AXIS_KINDS:
                raise ValueError(f"unknown axis kind {ax!r}")
            if not lo < hi:
                raise ValueError(f"empty bounds ({lo}, {hi})")
            if ax == "circle" and (lo, hi) != (0.0, 1.0):
                raise ValueError("circle axes always have bounds (0, 1)")
            if ax == "half_line" and lo < 0:
                raise ValueError("half-line bounds must be nonnegative")
        if self.norm not in ("max", "euclidean"):
            raise ValueError(f"unknown norm {self.norm!r}")
        if self.grid_size < 1:
            raise ValueError("grid_size must be positive")

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def periodic(self) -> np.ndarray:
        return np.array([ax == "circle" for ax in self.axes])

    @property
    def measure(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    def as_points(self, x) -> np.ndarray:
        return _as_points(x, self.dim)

    def reduce(self, x):
        """Wrap circle coordinates into ``[0, 1)``."""
        pts = self.as_points(x).copy()
        per = self.periodic
        if per.any():
            wrapped = np.mod(pts[:, per], 1.0)
            # mod can round up to exactly 1.0 for tiny negative inputs
            wrapped[wrapped >= 1.0] = 0.0
            pts[:, per] = wrapped
        return _restore(pts, x, self.dim)

    def contains(self, x, tol: float = 1e-12) -> np.ndarray:
        pts = self.as_points(x)
        ok = np.all(np.isfinite(pts), axis=1)
        for a, ax in enumerate(self.axes):
            if ax == "circle":
                ok &= (pts[:, a] >= -tol) & (pts[:, a] < 1.0 + tol)
            elif ax == "half_line":
                ok &= pts[:, a] > 0.0
        return ok

    def axis_offsets(self, a, b) -> np.ndarray:
        """Signed shortest per-axis displacement from ``a`` to ``b``, broadcast."""
        diff = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        per = self.periodic
        if per.any():
            diff = np.array(diff, copy=True)
            sub = diff[..., per]
            diff[..., per] = sub - np.round(sub)
        return diff

    def distance(self, a, b) -> np.ndarray:
        """Carrier metric between broadcastable ``(..., d)`` arrays."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if self.dim == 1 and a.ndim <= 1 and b.ndim <= 1:
            a = a[..., None]
            b = b[..., None]
        diff = np.abs(self.axis_offsets(a, b))
        if self.norm == "max" or self.dim == 1:
            return diff.max(axis=-1)
        return np.sqrt((diff * diff).sum(axis=-1))

    def quad_grid(self, grid_size: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Tensor midpoint rule over ``bounds``; weights sum to ``measure``."""
        g = self.grid_size if grid_size is None else int(grid_size)
        axes = [lo + (np.arange(g) + 0.5) * (hi - lo) / g for lo, hi in self.bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.column_stack([m.ravel() for m in mesh])
        weights = np.full(nodes.shape[0], self.measure / nodes.shape[0])
        return nodes, weights

    def sample_uniform(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return lo + (hi - lo) * rng.random((n, self.dim))


def circle(grid_size: int = 2048) -> MetricSpace:
    return MetricSpace("circle", ("circle",), ((0.0, 1.0),), grid_size=grid_size)


def real_line(lo: float = 0.0, hi: float = 1.0, grid_size: int = 2048) -> MetricSpace:
    return MetricSpace("real_line", ("line",), ((float(lo), float(hi)),), grid_size=grid_size)


def positive_half_line(lo: float = 1.0, hi: float = 4.0, grid_size: int = 2048) -> MetricSpace:
    return MetricSpace("positive_half_line", ("half_line",), ((float(lo), float(hi)),), grid_size=grid_size)


def box(bounds: Sequence[Sequence[float]], norm: str = "max", grid_size: int = 256) -> MetricSpace:
    bounds = tuple((float(lo), float(hi)) for lo, hi in bounds)
    return MetricSpace("box_in_Rd", ("line",) * len(bounds), bounds, norm=norm, grid_size=grid_size)


def product(*factors: MetricSpace, grid_size: int = 256) -> MetricSpace:
    """Tensor product of carriers with the max metric."""
    axes = sum((f.axes for f in factors), ())
    bounds = sum((f.bounds for f in factors), ())
    return MetricSpace("product", axes, bounds, norm="max", grid_size=grid_size)


# ---------------------------------------------------------------------------
# group actions


@dataclass(frozen=True)
class GroupAction:
    """Cyclic action generated by ``forward``.

    ``power`` may supply a closed form ``(k, points) -> phi^k(points)`` where
    ``k`` is an integer or an integer array broadcast over rows; without it
    powers are built by repeated application of ``forward``/``inverse``.
    """

    name: str
    dim: int
    forward: Callable[[np.ndarray], np.ndarray]
    inverse: Callable[[np.ndarray], np.ndarray]
    max_power: int
    power: Callable | None = None
    params: dict = field(default_factory=dict)
    axis_monotone: bool = True

    def check_power(self, k) -> None:
        kmax = int(np.max(np.abs(k))) if np.size(k) else 0
        if kmax > self.max_power:
            raise PowerOverflowError(
                f"|k| = {kmax} exceeds max_power = {self.max_power} for action {self.name!r}"
            )

    def powers(self, k, pts: np.ndarray) -> np.ndarray:
        """``phi^k`` applied row-wise to ``(n, d)`` points; no bounds check."""
        if self.power is not None:
            return self.power(k, pts)
        k = np.broadcast_to(np.asarray(k, dtype=int), (pts.shape[0],))
        out = pts.copy()
        for row in range(pts.shape[0]):
            p = out[row : row + 1]
            step = self.forward if k[row] > 0 else self.inverse
            for _ in range(abs(int(k[row]))):
                p = step(p)
            out[row : row + 1] = p
        return out


def _k_column(k):
    k = np.asarray(k, dtype=float)
    return k.reshape(-1, 1) if k.ndim else k


def trivial(dim: int = 1) -> GroupAction:
    ident = lambda x: np.array(x, dtype=float, copy=True)
    return GroupAction("trivial", dim, ident, ident, max_power=10**9, power=lambda k, x: ident(x))


def rotation(alpha: float) -> GroupAction:
    """Rotation ``x -> x + alpha mod 1`` of the circle."""
    alpha = float(alpha)

    def power(k, x):
        y = np.mod(x + _k_column(k) * alpha, 1.0)
        y[y >= 1.0] = 0.0
        return y

    return GroupAction(
        "rotation", 1, lambda x: power(1, x), lambda x: power(-1, x),
        max_power=10**6, power=power, params={"alpha": alpha},
    )


def dilation(factor: float | Sequence[float] = 2.0) -> GroupAction:
    """Axis-wise dilation ``x -> factor * x``; a sequence gives per-axis factors."""
    factors = np.atleast_1d(np.asarray(factor, dtype=float))
    if np.any(factors <= 0):
        raise ValueError("dilation factors must be positive")
    logs = np.abs(np.log2(factors))
    # keep factor**k well inside the normal double range
    max_power = int(1000 / logs.max()) if logs.max() > 0 else 10**9

    def power(k, x):
        return x * np.power(factors, _k_column(k))

    scalar = factors.size == 1
    return GroupAction(
        "dilation", int(factors.size), lambda x: power(1, x), lambda x: power(-1, x),
        max_power=max_power, power=power,
        params={"factor": float(factors[0]) if scalar else factors.tolist()},
    )


def translation(shift: float | Sequence[float] = 1.0) -> GroupAction:
    """Translation ``x -> x + shift`` (per-axis shifts for a sequence)."""
    shifts = np.atleast_1d(np.asarray(shift, dtype=float))

    def power(k, x):
        return x + _k_column(k) * shifts

    scalar = shifts.size == 1
    return GroupAction(
        "translation", int(shifts.size), lambda x: power(1, x), lambda x: power(-1, x),
        max_power=10**5, power=power,
        params={"shift": float(shifts[0]) if scalar else shifts.tolist()},
    )


def product_action(*actions: GroupAction) -> GroupAction:
    """Apply component generators independently on consecutive axis blocks."""
    dims = [a.dim for a in actions]
    cuts = np.cumsum([0] + dims)

    def power(k, x):
        blocks = [a.powers(k, x[:, cuts[i] : cuts[i + 1]]) for i, a in enumerate(actions)]
        return np.concatenate(blocks, axis=1)

    return GroupAction(
        "product", int(cuts[-1]), lambda x: power(1, x), lambda x: power(-1, x),
        max_power=min(a.max_power for a in actions), power=power,
        params={"components": [{"name": a.name, **a.params} for a in actions]},
        axis_monotone=all(a.axis_monotone for a in actions),
    )


def apply_power(action: GroupAction, k: int, x):
    """Return ``phi^k . x``."""
    action.check_power(k)
    pts = _as_points(x, action.dim)
    return _restore(action.powers(int(k), pts), x, action.dim)


def orbit(action: GroupAction, x, n_max: int):
    """Orbit segment ``[phi^k x for k in -n_max..n_max]``; index 0 holds ``k = -n_max``."""
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    action.check_power(n_max)
    pt = _as_points(x, action.dim)
    if pt.shape[0] != 1:
        raise ValueError("orbit expects a single point")
    ks = np.arange(-n_max, n_max + 1)
    rows = np.repeat(pt, ks.size, axis=0)
    out = action.powers(ks, rows)
    return out[:, 0] if action.dim == 1 and np.ndim(x) <= 1 else out


# ---------------------------------------------------------------------------
# covering numbers and orbital dimension


def _metric_fn(metric):
    """Distance ``f(a, b)`` over trailing point axes; callables may keep a size-1 axis."""
    if isinstance(metric, MetricSpace):
        return metric.distance, metric.dim

    def dist(a, b):
        out = np.asarray(metric(a, b), dtype=float)
        if out.ndim == max(np.ndim(a), np.ndim(b)) and out.shape[-1] == 1:
            out = out[..., 0]
        return out

    return dist, None


def covering_number(points, metric, r: float) -> int:
    """Greedy count of radius-``r`` balls covering ``points``.

    The first uncovered point anchors each ball; among the uncovered points
    within ``r`` of the anchor, the center that covers the most uncovered
    points is used (first one on ties).  The count is an upper bound on the
    minimum covering number.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    dist, dim = _metric_fn(metric)
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise EmptyInputError("covering_number needs at least one point")
    if dim is not None:
        pts = _as_points(pts, dim)
    elif pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    uncovered = np.ones(pts.shape[0], dtype=bool)
    count = 0
    while uncovered.any():
        anchor = int(np.argmax(uncovered))
        near = np.flatnonzero(uncovered & (dist(pts[anchor], pts) <= r))
        live = pts[uncovered]
        # coverage of each candidate center among the still-uncovered points
        gains = np.concatenate([
            (dist(pts[near[s : s + 128]][:, None, :], live[None, :, :]) <= r).sum(axis=1)
            for s in range(0, near.size, 128)
        ])
        center = near[int(np.argmax(gains))]
        uncovered &= ~(dist(pts[center], pts) <= r)
        count += 1
    return count


@dataclass(frozen=True)
class DimensionReport:
    d_orb: float
    d_eff: float
    radii_used: list
    covering_counts: list
    fit_r2: float
    dim: int
    raw_slope: float
    degenerate: bool = False
    n_max: int = 0

    def to_dict(self) -> dict:
        return {
            "d_orb": self.d_orb,
            "d_eff": self.d_eff,
            "dim": self.dim,
            "raw_slope": self.raw_slope,
            "fit_r2": self.fit_r2,
            "degenerate": self.degenerate,
            "n_max": self.n_max,
            "radii_used": list(self.radii_used),
            "covering_counts": list(self.covering_counts),
        }


DEFAULT_RADII = tuple(float(r) for r in np.geomspace(0.1, 0.005, 5))


def _loglog_slope(x, y):
    """Least-squares slope and R^2 of ``y`` on ``x``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (y - y.mean())) / sxx
    resid = y - y.mean() - slope * xc
    syy = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 if syy == 0 else 1.0 - float(resid @ resid) / syy
    return slope, r2


def _dimension_report(counts, radii, dim, n_max, strict, trivial_action):
    counts = [int(c) for c in counts]
    if len(set(counts)) == 1:
        if strict and not trivial_action:
            raise DegenerateFitError(f"covering counts are all equal to {counts[0]}")
        slope, r2, degenerate = 0.0, 1.0, True
    else:
        slope, r2 = _loglog_slope(np.log(1.0 / np.asarray(radii)), np.log(counts))
        degenerate = False
    d_orb = float(min(max(slope, 0.0), dim))
    return DimensionReport(
        d_orb=d_orb, d_eff=float(dim - d_orb), radii_used=[float(r) for r in radii],
        covering_counts=counts, fit_r2=float(r2), dim=dim, raw_slope=float(slope),
        degenerate=degenerate, n_max=int(n_max),
    )


def orbital_dimension(
    space: MetricSpace,
    action: GroupAction,
    x,
    radii: Sequence[float] = DEFAULT_RADII,
    n_max: int = 4096,
    strict: bool = False,
) -> DimensionReport:
    """Log-log growth of greedy covering counts of one orbit segment.

    ``n_max`` is capped at the action's ``max_power``.  Equal counts at every
    radius give ``d_orb = 0`` with ``degenerate=True``; with ``strict`` that
    raises for non-trivial actions instead.
    """
    radii = np.asarray(sorted((float(r) for r in radii), reverse=True))
    if radii.size < 4 or np.any(radii <= 0):
        raise ValueError("need at least 4 positive radii")
    if radii[0] / radii[-1] < 10:
        raise ValueError("radii must span at least one decade")
    n_used = min(int(n_max), action.max_power)
    pts = space.reduce(_as_points(orbit(action, space.as_points(x), n_used), space.dim))
    counts = [covering_number(pts, space, r) for r in radii]
    return _dimension_report(counts, radii, space.dim, n_used, strict, action.name == "trivial")


def orbital_dimension_multistart(
    space: MetricSpace,
    action: GroupAction,
    starts: int = 10,
    seed: int = 0,
    radii: Sequence[float] = DEFAULT_RADII,
    n_max: int = 4096,
) -> tuple[DimensionReport, list[DimensionReport]]:
    """Average the orbital dimension over uniformly sampled starting points."""
    rng = np.random.default_rng(seed)
    xs = space.sample_uniform(rng, starts)
    reports = [orbital_dimension(space, action, xs[i], radii, n_max) for i in range(starts)]
    d_orb = float(np.mean([r.d_orb for r in reports]))
    counts = np.mean([r.covering_counts for r in reports], axis=0)
    summary = DimensionReport(
        d_orb=d_orb, d_eff=float(space.dim - d_orb), radii_used=reports[0].radii_used,
        covering_counts=[float(c) for c in counts],
        fit_r2=float(np.mean([r.fit_r2 for r in reports])), dim=space.dim,
        raw_slope=float(np.mean([r.raw_slope for r in reports])),
        degenerate=all(r.degenerate for r in reports), n_max=reports[0].n_max,
    )
    return summary, reports


# ---------------------------------------------------------------------------
# quasi-invariance


def _box(test_set, dim):
    arr = np.asarray(test_set, dtype=float)
    if arr.shape == (2,) and dim == 1:
        arr = arr.reshape(1, 2)
    if arr.shape != (dim, 2) or np.any(arr[:, 0] >= arr[:, 1]):
        raise ValueError(f"test set {test_set!r} is not a nonempty box of dimension {dim}")
    return arr


def _image_box(space, action, n, boxarr):
    lo = action.powers(n, boxarr[:, 0].reshape(1, -1))[0]
    hi = action.powers(n, boxarr[:, 1].reshape(1, -1))[0]
    out = np.column_stack([np.minimum(lo, hi), np.maximum(lo, hi)])
    per = space.periodic
    # on circle axes keep the rotated arc contiguous
    out[per, 0] = lo[per]
    out[per, 1] = lo[per] + np.mod(hi[per] - lo[per], 1.0)
    full = per & (boxarr[:, 1] - boxarr[:, 0] >= 1.0)
    out[full] = (0.0, 1.0)
    return out


def _box_mass(space, density, boxarr, order=64):
    nodes, w = np.polynomial.legendre.leggauss(order)
    axes, wts = [], []
    for lo, hi in boxarr:
        axes.append(0.5 * (hi - lo) * nodes + 0.5 * (hi + lo))
        wts.append(0.5 * (hi - lo) * w)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    wmesh = np.meshgrid(*wts, indexing="ij")
    weight = np.prod([m.ravel() for m in wmesh], axis=0)
    vals = np.asarray(density(space.reduce(pts)), dtype=float).reshape(-1)
    return float(weight @ vals)


def quasi_invariance_constants(
    space: MetricSpace,
    action: GroupAction,
    density: Callable[[np.ndarray], np.ndarray],
    test_sets: Sequence,
    n_powers: int = 3,
) -> tuple[float, float]:
    """Worst-case mass ratios ``P(phi^n A) / P(A)`` over sets and ``|n| <= n_powers``.

    ``density`` maps ``(m, d)`` points to design density values; masses are
    Gauss-Legendre integrals over the boxes and their images.
    """
    if not action.axis_monotone:
        raise ValueError("images of boxes are only computed for axis-monotone actions")
    action.check_power(n_powers)
    ratios = []
    for ts in test_sets:
        boxarr = _box(ts, space.dim)
        base = _box_mass(space, density, boxarr)
        if not base > 0:
            raise ZeroMassError(f"test set {ts!r} has zero design mass")
        for n in range(-n_powers, n_powers + 1):
            img = boxarr if n == 0 else _image_box(space, action, n, boxarr)
            ratios.append(_box_mass(space, density, img) / base)
    if not ratios:
        raise EmptyInputError("no test sets given")
    return float(min(ratios)), float(max(ratios))
