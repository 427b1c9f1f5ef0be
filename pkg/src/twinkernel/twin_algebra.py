"""Twin operations and detection of the subgroup that preserves a base operation.

Linearity is certified on sampled point pairs within a tolerance; nothing
here attempts a symbolic proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CarrierEscapeError
from .space import GroupAction, MetricSpace, _as_points

DEFAULT_PAIRS = 200
DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class BinaryOp:
    apply: Callable[[np.ndarray, np.ndarray], np.ndarray]
    description: str

    def __call__(self, x, y):
        return self.apply(x, y)


addition = BinaryOp(lambda x, y: x + y, "addition")
midpoint = BinaryOp(lambda x, y: 0.5 * (x + y), "midpoint")
maximum = BinaryOp(np.maximum, "max")

BUILTIN_OPS = {op.description: op for op in (addition, midpoint, maximum)}


@dataclass(frozen=True)
class LinearityReport:
    tested_powers: tuple[int, int]
    linear_powers: tuple[int, ...]
    is_subgroup_on_window: bool
    tolerance: float
    period: int | None = None
    coset_representatives: tuple[int, ...] | None = None

    def to_dict(self) -> dict:
        return {
            "tested_powers": list(self.tested_powers),
            "linear_powers": list(self.linear_powers),
            "is_subgroup_on_window": self.is_subgroup_on_window,
            "tolerance": self.tolerance,
            "period": self.period,
            "coset_representatives": None if self.coset_representatives is None
            else list(self.coset_representatives),
        }


def _pairs(test_pairs, dim):
    if isinstance(test_pairs, tuple) and len(test_pairs) == 2 and np.ndim(test_pairs[0]) >= 1:
        xs, ys = test_pairs
    else:
        xs = [p[0] for p in test_pairs]
        ys = [p[1] for p in test_pairs]
    return _as_points(xs, dim), _as_points(ys, dim)


def sample_pairs(space: MetricSpace, n: int = DEFAULT_PAIRS, seed: int = 0):
    """``n`` uniform point pairs from the space's bounds, as two ``(n, d)`` arrays."""
    rng = np.random.default_rng(seed)
    return space.sample_uniform(rng, n), space.sample_uniform(rng, n)


def _combine(base, a, b, space):
    out = np.asarray(base(a, b), dtype=float)
    if space is not None:
        out = space.reduce(out)
        if not np.all(space.contains(out)):
            raise CarrierEscapeError(f"{base.description} left the carrier")
    return out


def _dist(space, a, b):
    if space is None:
        return np.max(np.abs(a - b), axis=-1)
    return space.distance(a, b)


def _twin(base, action, k, xs, ys, space):
    gx = action.powers(k, xs)
    gy = action.powers(k, ys)
    out = action.powers(-k, _combine(base, gx, gy, space))
    return out if space is None else space.reduce(out)


def twin_op(base: BinaryOp, action: GroupAction, k: int, x, y, space: MetricSpace | None = None):
    """``phi^{-k}(phi^k x  <op>  phi^k y)``.

    With ``space`` given, circle coordinates are wrapped and an intermediate
    result outside the carrier raises :class:`CarrierEscapeError`.
    """
    action.check_power(k)
    xs = _as_points(x, action.dim)
    ys = _as_points(y, action.dim)
    out = _twin(base, action, int(k), xs, ys, space)
    if np.ndim(x) == 0 and action.dim == 1:
        return float(out[0, 0])
    return out[:, 0] if action.dim == 1 and np.ndim(x) == 1 else out


def is_linear_element(base: BinaryOp, action: GroupAction, k: int, test_pairs,
                      tol: float = DEFAULT_TOL, space: MetricSpace | None = None) -> bool:
    """Whether ``phi^k`` preserves ``base`` on every test pair within ``tol``."""
    action.check_power(k)
    xs, ys = _pairs(test_pairs, action.dim)
    if xs.shape[0] < 50:
        raise ValueError("need at least 50 test pairs")
    if k == 0:
        return True
    lhs = action.powers(k, _combine(base, xs, ys, space))
    rhs = _combine(base, action.powers(k, xs), action.powers(k, ys), space)
    if space is not None:
        lhs = space.reduce(lhs)
    return bool(np.all(_dist(space, lhs, rhs) <= tol))


def _period(linear, window):
    positives = [k for k in linear if k > 0]
    if not positives:
        return None
    p = min(positives)
    expected = {k for k in range(-window, window + 1) if k % p == 0}
    return p if set(linear) == expected else None


def linear_subgroup_scan(base: BinaryOp, action: GroupAction, window: int, test_pairs,
                         tol: float = DEFAULT_TOL, space: MetricSpace | None = None) -> LinearityReport:
    """Scan powers in ``[-window, window]`` for membership in the linear subgroup."""
    action.check_power(window)
    linear = tuple(k for k in range(-window, window + 1)
                   if is_linear_element(base, action, k, test_pairs, tol, space))
    members = set(linear)
    closed = all(
        (k + m) in members
        for k in linear for m in linear if abs(k + m) <= window
    ) and all(-k in members for k in linear)
    period = _period(linear, window) if closed else None
    reps = tuple(range(period)) if period is not None else None
    return LinearityReport((-window, window), linear, closed, tol, period, reps)


def verify_twin_composition(base: BinaryOp, action: GroupAction, k: int, m: int, test_pairs,
                            tol: float = DEFAULT_TOL, space: MetricSpace | None = None) -> bool:
    """Check ``x (.)_{k+m} y == phi^{-m}((phi^m x) (.)_k (phi^m y))`` on the pairs."""
    for p in (k, m, k + m):
        action.check_power(p)
    xs, ys = _pairs(test_pairs, action.dim)
    lhs = _twin(base, action, k + m, xs, ys, space)
    inner = _twin(base, action, k, action.powers(m, xs), action.powers(m, ys), space)
    rhs = action.powers(-m, inner)
    if space is not None:
        rhs = space.reduce(rhs)
    return bool(np.all(_dist(space, lhs, rhs) <= tol))
