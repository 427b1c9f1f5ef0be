"""Compiled kernel-weighted window sums.

Points are transported and sorted by the caller; the routines here scan the
window of half-width ``h`` around each query along the first coordinate and
test the full carrier metric inside it.  Summation follows the sorted data
order, so results do not depend on how queries are batched.
"""

import numba
import numpy as np

_EPS = 1e-12


@numba.njit(cache=True, inline="always")
def _horner(coeffs, u):
    acc = 0.0
    for k in range(coeffs.shape[0] - 1, -1, -1):
        acc = acc * u + coeffs[k]
    return acc


@numba.njit(cache=True, inline="always")
def _dist(q, x, periods, euclid):
    d = q.shape[0]
    acc = 0.0
    for a in range(d):
        t = abs(q[a] - x[a])
        per = periods[a]
        if per > 0.0:
            if t >= per:
                t = t % per
            t = min(t, per - t)
        if euclid:
            acc += t * t
        elif t > acc:
            acc = t
    return np.sqrt(acc) if euclid else acc


@numba.njit(cache=True)
def _segments(first, q0, h, per):
    """Index ranges of sorted ``first`` within distance ``h`` of ``q0``."""
    n = first.shape[0]
    out = np.zeros((3, 2), dtype=np.int64)
    if per > 0.0 and 2.0 * h >= per:
        out[0, 1] = n
        return out
    eps = _EPS * (1.0 + abs(q0) + h)
    lo = np.searchsorted(first, q0 - h - eps)
    hi = np.searchsorted(first, q0 + h + eps, side="right")
    out[0, 0] = lo
    out[0, 1] = hi
    if per > 0.0:
        if q0 - h - eps < 0.0:
            a = np.searchsorted(first, q0 - h - eps + per)
            out[1, 0] = max(a, hi)
            out[1, 1] = n
        if q0 + h + eps >= per:
            b = np.searchsorted(first, q0 + h + eps - per, side="right")
            out[2, 0] = 0
            out[2, 1] = min(b, lo)
    return out


@numba.njit(cache=True)
def window_sums(queries, data, values, h, coeffs, periods, euclid):
    """Return ``(S0, SV)`` with ``S0[a] = sum_i K(d(q_a, x_i)/h)`` and
    ``SV[a, c] = sum_i K(d(q_a, x_i)/h) * values[i, c]``.

    ``data`` must be sorted by its first column; the kernel profile is the
    polynomial ``coeffs`` on ``[0, 1]`` and zero beyond.
    """
    m = queries.shape[0]
    p = values.shape[1]
    s0 = np.zeros(m)
    sv = np.zeros((m, p))
    first = data[:, 0].copy()
    tv = np.zeros(p)
    for a in range(m):
        q = queries[a]
        seg = _segments(first, q[0], h, periods[0])
        t0 = 0.0
        tv[:] = 0.0
        for s in range(3):
            for i in range(seg[s, 0], seg[s, 1]):
                u = _dist(q, data[i], periods, euclid) / h
                if u <= 1.0:
                    k = _horner(coeffs, u)
                    t0 += k
                    for c in range(p):
                        tv[c] += k * values[i, c]
        s0[a] = t0
        for c in range(p):
            sv[a, c] = tv[c]
    return s0, sv


FAST_COEFFS = 6


@numba.njit(cache=True, fastmath=True)
def _segment_1d(first, v0, v1, q0, lo, hi, per, invh, c):
    # branch-free body so the loop vectorizes; coordinates are already reduced, so t < per
    t0 = 0.0
    t1 = 0.0
    t2 = 0.0
    for i in range(lo, hi):
        t = abs(q0 - first[i])
        if per > 0.0:
            t = min(t, per - t)
        u = t * invh
        k = ((((c[5] * u + c[4]) * u + c[3]) * u + c[2]) * u + c[1]) * u + c[0]
        k = k if u <= 1.0 else 0.0
        t0 += k
        t1 += k * v0[i]
        t2 += k * v1[i]
    return t0, t1, t2


@numba.njit(cache=True)
def _window_sums_1d(queries, first, values_t, h, coeffs, per):
    """One-dimensional sums; ``values_t`` is ``(p, n)`` with ``p`` even, ``coeffs`` has 6 entries."""
    m = queries.shape[0]
    p = values_t.shape[0]
    s0 = np.zeros(m)
    sv = np.zeros((m, p))
    invh = 1.0 / h
    for a in range(m):
        q0 = queries[a]
        seg = _segments(first, q0, h, per)
        for c in range(0, p, 2):
            t0 = 0.0
            t1 = 0.0
            t2 = 0.0
            for s in range(3):
                if seg[s, 1] > seg[s, 0]:
                    r = _segment_1d(first, values_t[c], values_t[c + 1], q0, seg[s, 0], seg[s, 1], per, invh, coeffs)
                    t0 += r[0]
                    t1 += r[1]
                    t2 += r[2]
            s0[a] = t0
            sv[a, c] = t1
            sv[a, c + 1] = t2
    return s0, sv


def window_sums_1d(queries, data, values, h, coeffs, per):
    """Fast path for one-dimensional carriers and profiles with at most 6 coefficients."""
    n, p = values.shape
    vt = np.zeros((p + p % 2, n))
    vt[:p] = values.T
    c = np.zeros(FAST_COEFFS)
    c[: coeffs.shape[0]] = coeffs
    s0, sv = _window_sums_1d(np.ascontiguousarray(queries[:, 0]), np.ascontiguousarray(data[:, 0]),
                             vt, float(h), c, float(per))
    return s0, np.ascontiguousarray(sv[:, :p])


@numba.njit(cache=True)
def support_counts(queries, data, h, periods, euclid):
    """Number of data points within distance ``h`` of each query."""
    m = queries.shape[0]
    out = np.zeros(m, dtype=np.int64)
    first = data[:, 0].copy()
    for a in range(m):
        q = queries[a]
        seg = _segments(first, q[0], h, periods[0])
        c = 0
        for s in range(3):
            for i in range(seg[s, 0], seg[s, 1]):
                if _dist(q, data[i], periods, euclid) <= h:
                    c += 1
        out[a] = c
    return out


def sort_by_first(points):
    order = np.argsort(points[:, 0], kind="stable")
    return order, np.ascontiguousarray(points[order])
