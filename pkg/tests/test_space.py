import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twinkernel import space as sp
from twinkernel.errors import EmptyInputError, PowerOverflowError, ZeroMassError


def brute_force_cover(points, dist, r):
    """Literal greedy cover: first uncovered point becomes a center."""
    left = list(range(len(points)))
    count = 0
    while left:
        c = points[left[0]]
        left = [i for i in left if dist(c, points[i]) > r]
        count += 1
    return count


# --- carriers -----------------------------------------------------------------


def test_circle_distance_wraps():
    c = sp.circle()
    assert c.distance(0.05, 0.95) == pytest.approx(0.1)
    assert c.distance(0.2, 0.7) == pytest.approx(0.5)
    assert c.distance(0.3, 0.3) == 0.0


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
def test_circle_metric_symmetric(x, y):
    c = sp.circle()
    assert c.distance(x, y) == c.distance(y, x)
    assert 0.0 <= c.distance(x, y) <= 0.5


def test_reduce_keeps_circle_in_unit_interval():
    c = sp.circle()
    out = c.reduce(np.array([1.0, -0.25, 2.5, 0.999]))
    np.testing.assert_allclose(out, [0.0, 0.75, 0.5, 0.999])
    assert np.all((out >= 0) & (out < 1))


@pytest.mark.parametrize("space", [sp.circle(), sp.real_line(), sp.positive_half_line(),
                                   sp.box([(0, 1), (0, 2)], grid_size=64)])
def test_quadrature_weights_sum_to_measure(space):
    _, w = space.quad_grid()
    assert abs(w.sum() - space.measure) <= 1e-10 * space.measure


def test_box_euclidean_and_max_norms():
    pts = np.array([[0.0, 0.0]]), np.array([[0.3, 0.4]])
    assert sp.box([(0, 1), (0, 1)]).distance(*pts)[0] == pytest.approx(0.4)
    assert sp.box([(0, 1), (0, 1)], norm="euclidean").distance(*pts)[0] == pytest.approx(0.5)


# --- actions ----------------------------------------------------------------------


def test_apply_power_examples():
    assert sp.apply_power(sp.rotation(0.25), 2, 0.1) == pytest.approx(0.6)
    assert sp.apply_power(sp.dilation(2.0), -1, 4.0) == 2.0
    for act in (sp.rotation(0.3), sp.dilation(2.0), sp.translation(1.0), sp.trivial()):
        assert sp.apply_power(act, 0, 0.37) == pytest.approx(0.37, abs=0)


def test_power_overflow():
    act = sp.dilation(2.0)
    with pytest.raises(PowerOverflowError):
        sp.apply_power(act, act.max_power + 1, 1.0)


def test_orbit_examples():
    assert sp.orbit(sp.trivial(), 0.3, 5).tolist() == [0.3] * 11
    np.testing.assert_allclose(sp.orbit(sp.rotation(0.5), 0.0, 2), [0, 0.5, 0, 0.5, 0])
    np.testing.assert_array_equal(sp.orbit(sp.dilation(2.0), 1.0, 2), [0.25, 0.5, 1, 2, 4])


def test_inverse_undoes_forward():
    rng = np.random.default_rng(3)
    c = sp.circle()
    for act, pts in [(sp.rotation(0.618), rng.random((50, 1))),
                     (sp.dilation(2.0), 1 + 3 * rng.random((50, 1))),
                     (sp.translation(0.7), rng.random((50, 1)))]:
        back = act.inverse(act.forward(pts))
        d = c.distance(back, pts) if act.name == "rotation" else np.abs(back - pts)[:, 0]
        assert np.max(d) <= 1e-12


@settings(max_examples=1000, deadline=None)
@given(st.integers(-400, 400), st.integers(-400, 400), st.floats(0, 1, exclude_max=True))
def test_group_law_rotation(k, m, x):
    act = sp.rotation((math.sqrt(5) - 1) / 2)
    c = sp.circle()
    lhs = sp.apply_power(act, k + m, x)
    rhs = sp.apply_power(act, k, sp.apply_power(act, m, x))
    assert c.distance(lhs, rhs) <= 1e-10


@settings(max_examples=300, deadline=None)
@given(st.integers(-30, 30), st.integers(-30, 30), st.floats(1, 4))
def test_group_law_dilation(k, m, x):
    act = sp.dilation(2.0)
    lhs = sp.apply_power(act, k + m, x)
    rhs = sp.apply_power(act, k, sp.apply_power(act, m, x))
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_product_action_splits_axes():
    act = sp.product_action(sp.trivial(1), sp.dilation(2.0))
    out = sp.apply_power(act, 2, np.array([[0.3, 0.1]]))
    np.testing.assert_allclose(out, [[0.3, 0.4]])


# --- covering ---------------------------------------------------------------------


def test_covering_examples():
    c = sp.circle()
    assert sp.covering_number(np.array([0.4]), c, 0.01) == 1
    assert sp.covering_number(np.array([0.0, 0.5]), c, 0.1) == 2
    grid = np.linspace(0, 1, 101)
    assert 10 <= sp.covering_number(grid, sp.real_line(), 0.05) <= 11


def test_covering_empty():
    with pytest.raises(EmptyInputError):
        sp.covering_number(np.array([]), sp.circle(), 0.1)


def test_covering_is_valid_cover_and_no_worse_than_literal_greedy():
    rng = np.random.default_rng(0)
    pts = rng.random(300)
    line = sp.real_line()
    for r in (0.01, 0.03, 0.1):
        n = sp.covering_number(pts, line, r)
        # a cover with n balls of radius r has at most n disjoint 2r-separated points
        assert n <= brute_force_cover(pts, lambda a, b: abs(a - b), r)
        assert n >= math.ceil((pts.max() - pts.min()) / (2 * r + 1e-12))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=60), st.floats(0.01, 0.3))
def test_covering_monotone_in_radius(xs, r):
    pts = np.array(xs)
    c = sp.circle()
    assert sp.covering_number(pts, c, 2 * r) <= sp.covering_number(pts, c, r)


def test_covering_accepts_callable_metric():
    pts = np.linspace(0, 1, 11)
    assert sp.covering_number(pts, lambda a, b: np.abs(a - b), 0.5) == 1


# --- orbital dimension ---------------------------------------------------------------


def test_orbital_dimension_trivial_is_zero():
    rep = sp.orbital_dimension(sp.circle(), sp.trivial(), 0.3)
    assert rep.d_orb == 0.0 and rep.d_eff == 1.0
    assert rep.covering_counts == [1] * 5


def test_orbital_dimension_golden_rotation():
    rep = sp.orbital_dimension(sp.circle(), sp.rotation((math.sqrt(5) - 1) / 2), 0.0, n_max=4096)
    assert 0.85 <= rep.d_orb <= 1.15
    assert rep.d_eff == pytest.approx(1.0 - rep.d_orb)
    for r, n in zip(rep.radii_used, rep.covering_counts):
        assert 0.5 / (2 * r) <= n <= 2 / (2 * r)


def test_orbital_dimension_dilation():
    rep = sp.orbital_dimension(sp.positive_half_line(), sp.dilation(2.0), 1.0)
    assert rep.d_orb <= 0.2
    assert rep.d_eff >= 0.8


def test_orbital_dimension_needs_decade():
    with pytest.raises(ValueError):
        sp.orbital_dimension(sp.circle(), sp.rotation(0.3), 0.0, radii=[0.1, 0.09, 0.08, 0.07])


@settings(max_examples=20, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0, 1, exclude_max=True))
def test_dimension_report_bounds(alpha, x):
    rep = sp.orbital_dimension(sp.circle(), sp.rotation(alpha), x, n_max=300)
    assert 0.0 <= rep.d_eff <= 1.0
    assert rep.d_eff + rep.d_orb == pytest.approx(1.0)


def test_multistart_averages():
    summary, reports = sp.orbital_dimension_multistart(sp.circle(), sp.rotation(0.618034), starts=4, n_max=1024)
    assert len(reports) == 4
    assert summary.d_orb == pytest.approx(np.mean([r.d_orb for r in reports]))


# --- quasi-invariance ----------------------------------------------------------------


def test_quasi_invariance_rotation_uniform():
    c1, c2 = sp.quasi_invariance_constants(
        sp.circle(), sp.rotation(0.3), lambda p: np.ones(p.shape[0]), [(0.1, 0.3), (0.8, 0.95)])
    assert c1 == pytest.approx(1.0, abs=1e-6) and c2 == pytest.approx(1.0, abs=1e-6)


def test_quasi_invariance_dilation_one_power():
    c1, c2 = sp.quasi_invariance_constants(
        sp.positive_half_line(1.0, 2.0), sp.dilation(2.0), lambda p: np.ones(p.shape[0]),
        [(1.1, 1.3), (1.4, 1.6)], n_powers=1)
    assert c1 == pytest.approx(0.5, rel=0.02) and c2 == pytest.approx(2.0, rel=0.02)


def test_quasi_invariance_trivial_exact():
    dens = lambda p: 1.0 + p[:, 0]
    assert sp.quasi_invariance_constants(sp.real_line(), sp.trivial(), dens, [(0.2, 0.4)]) == (1.0, 1.0)


def test_quasi_invariance_zero_mass():
    with pytest.raises(ZeroMassError):
        sp.quasi_invariance_constants(sp.real_line(), sp.trivial(), lambda p: np.zeros(p.shape[0]), [(0.2, 0.4)])


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(0.01, 0.2))
def test_quasi_invariance_brackets_one(lo, width):
    dens = lambda p: 1.0 + 0.5 * np.sin(2 * np.pi * p[:, 0])
    c1, c2 = sp.quasi_invariance_constants(sp.circle(), sp.rotation(0.1), dens, [(lo, lo + width)], 2)
    assert c1 <= 1.0 <= c2
