import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twinkernel import space as sp
from twinkernel.errors import NegativeLevelError, PowerOverflowError
from twinkernel.kernel import (
    BandwidthSchedule,
    BaseKernel,
    TwinKernelHierarchy,
    bandwidth,
    box_kernel,
    epanechnikov_kernel,
    gram_matrix,
    make_kernel,
    polynomial_kernel,
    triangular_kernel,
    twin_kernel_eval,
    validate_kernel,
)


def hier(kernel=None, action=None, space=None, h0=1.0, rho=0.5):
    space = space or sp.circle()
    return TwinKernelHierarchy(kernel or epanechnikov_kernel(), BandwidthSchedule(h0, rho),
                               action or sp.rotation(0.618), space)


# --- validation ---------------------------------------------------------------------


def test_box_fails_only_lipschitz():
    v = validate_kernel(box_kernel())
    assert v.K1.passed and v.K2.passed and v.K3.passed
    assert not v.K4.passed
    assert v.essential_ok and not v.all_ok


@pytest.mark.parametrize("kernel", [triangular_kernel(), epanechnikov_kernel()])
def test_smooth_profiles_pass(kernel):
    v = validate_kernel(kernel)
    assert v.all_ok
    assert v.K3.value == pytest.approx(1.0, abs=1e-9)


def test_mass_two_fails_k3():
    v = validate_kernel(polynomial_kernel([2.0]))
    assert not v.K3.passed and v.K3.value == pytest.approx(2.0)


def test_leaky_support_fails_k2():
    k = BaseKernel("leaky", lambda u: np.where(u <= 1.2, 1 / 1.2, 0.0) * (u >= 0))
    assert not validate_kernel(k).K2.passed


def test_unhinted_smooth_callable_passes_k4():
    k = BaseKernel("tri", lambda u: np.clip(2 * (1 - u), 0, None) * (u <= 1))
    assert validate_kernel(k).K4.passed


def test_validate_grid_size_floor():
    with pytest.raises(ValueError):
        validate_kernel(box_kernel(), grid_size=100)


def test_make_kernel_names():
    assert make_kernel("box").name == "box"
    assert make_kernel("custom", [1.0]).coeffs == (1.0,)
    with pytest.raises(ValueError):
        make_kernel("gaussian")


# --- bandwidths --------------------------------------------------------------------------


def test_bandwidth_examples():
    assert bandwidth(BandwidthSchedule(1.0, 0.5), 0) == 1.0
    assert bandwidth(BandwidthSchedule(1.0, 0.5), 3) == 0.125
    assert bandwidth(BandwidthSchedule(dyadic=True), 4) == 0.0625
    with pytest.raises(NegativeLevelError):
        bandwidth(BandwidthSchedule(), -1)


@given(st.floats(0.01, 10), st.floats(0.05, 0.95), st.integers(0, 40))
def test_bandwidth_strictly_decreasing(h0, rho, j):
    s = BandwidthSchedule(h0, rho)
    assert s(j + 1) < s(j)


# --- evaluation ----------------------------------------------------------------------------


def test_eval_at_coincident_points():
    h = hier()
    assert twin_kernel_eval(h, 3, 0.2, 0.2) == pytest.approx(1.5)


def test_rotation_transport_is_distance_neutral():
    h = hier()
    k = epanechnikov_kernel()
    rng = np.random.default_rng(1)
    for _ in range(50):
        x, y = rng.random(2)
        j = int(rng.integers(0, 6))
        d = min(abs(x - y), 1 - abs(x - y))
        assert twin_kernel_eval(h, j, x, y) == pytest.approx(float(k(d / h.bandwidth(j))), abs=1e-12)


def test_dilation_hand_transport():
    tri = triangular_kernel()
    h = TwinKernelHierarchy(tri, BandwidthSchedule(0.2, 0.5), sp.dilation(2.0), sp.positive_half_line(0.1, 4))
    # h_1 = 0.1; phi^{-1} gives 0.25 and 0.275
    assert twin_kernel_eval(h, 1, 0.5, 0.55) == pytest.approx(float(tri(0.25)), abs=1e-12)


def test_power_overflow_in_eval():
    act = sp.translation(1.0)
    h = TwinKernelHierarchy(box_kernel(), BandwidthSchedule(), act, sp.real_line())
    with pytest.raises(PowerOverflowError):
        twin_kernel_eval(h, act.max_power + 1, 0.1, 0.2)


def test_translation_reduces_to_classical():
    h = TwinKernelHierarchy(epanechnikov_kernel(), BandwidthSchedule(), sp.translation(0.37), sp.real_line())
    k = epanechnikov_kernel()
    rng = np.random.default_rng(2)
    for _ in range(50):
        x, y = rng.random(2)
        j = int(rng.integers(0, 8))
        assert twin_kernel_eval(h, j, x, y) == pytest.approx(float(k(abs(x - y) / h.bandwidth(j))), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 8), st.floats(1, 4), st.floats(1, 4))
def test_eval_symmetric(j, x, y):
    h = TwinKernelHierarchy(epanechnikov_kernel(), BandwidthSchedule(1, 0.25), sp.dilation(2.0),
                            sp.positive_half_line())
    assert twin_kernel_eval(h, j, x, y) == twin_kernel_eval(h, j, y, x)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 8), st.floats(1, 4), st.floats(1, 4))
def test_level_j_equals_level0_on_transported_points(j, x, y):
    space = sp.positive_half_line()
    act = sp.dilation(2.0)
    h = TwinKernelHierarchy(epanechnikov_kernel(), BandwidthSchedule(1, 0.25), act, space)
    hj = h.bandwidth(j)
    tx, ty = sp.apply_power(act, -j, x), sp.apply_power(act, -j, y)
    level0 = TwinKernelHierarchy(epanechnikov_kernel(), BandwidthSchedule(hj, 0.5), act, space)
    assert abs(twin_kernel_eval(h, j, x, y) - twin_kernel_eval(level0, 0, tx, ty)) <= 1e-14


# --- Gram matrices ------------------------------------------------------------------------------


def test_gram_small_cases():
    np.testing.assert_array_equal(gram_matrix(hier(), 0, [0.3]), [[1.5]])
    g = gram_matrix(hier(kernel=box_kernel()), 2, [0.4, 0.4])
    np.testing.assert_array_equal(g, np.ones((2, 2)))


@pytest.mark.parametrize("kernel", [box_kernel(), triangular_kernel(), epanechnikov_kernel()])
def test_gram_exactly_symmetric(kernel):
    pts = np.random.default_rng(5).random(30)
    for j in range(4):
        g = gram_matrix(hier(kernel=kernel), j, pts)
        assert np.array_equal(g, g.T)


def test_triangular_gram_psd():
    pts = np.random.default_rng(7).random(20)
    h = hier(kernel=triangular_kernel(), h0=0.3)
    g = gram_matrix(h, 0, pts)
    assert np.linalg.eigvalsh(g).min() >= -1e-8


def test_periodic_rotation_levels_repeat():
    # alpha = 1/4 has period 4: levels j and j + 4 coincide at equal bandwidth
    pts = np.random.default_rng(8).random(15)
    space, act = sp.circle(), sp.rotation(0.25)
    for j in range(3):
        a = TwinKernelHierarchy(triangular_kernel(), BandwidthSchedule(0.2 / 0.5**j, 0.5), act, space)
        b = TwinKernelHierarchy(triangular_kernel(), BandwidthSchedule(0.2 / 0.5 ** (j + 4), 0.5), act, space)
        np.testing.assert_allclose(gram_matrix(a, j, pts), gram_matrix(b, j + 4, pts), atol=1e-12)


# --- summation engine --------------------------------------------------------------------------


def dense_sums(h, j, q, data, vals):
    g = h.space.distance(h.transport(j, q)[:, None, :], h.transport(j, data)[None, :, :])
    w = h.base(g / h.bandwidth(j))
    return w.sum(1), w @ vals


@pytest.mark.parametrize("case", ["circle", "halfline", "box", "box_euclid"])
def test_window_sums_match_dense(case):
    rng = np.random.default_rng(11)
    if case == "circle":
        h = hier()
        data, q = rng.random((400, 1)), rng.random((60, 1))
    elif case == "halfline":
        h = TwinKernelHierarchy(epanechnikov_kernel(), BandwidthSchedule(1, 0.25), sp.dilation(2.0),
                                sp.positive_half_line())
        data, q = 1 + 3 * rng.random((400, 1)), 1 + 3 * rng.random((60, 1))
    else:
        norm = "euclidean" if case == "box_euclid" else "max"
        space = sp.box([(0, 1), (0, 1)], norm=norm)
        act = sp.product_action(sp.trivial(1), sp.dilation(2.0 ** 0.5))
        h = TwinKernelHierarchy(triangular_kernel(), BandwidthSchedule(), act, space)
        data, q = rng.random((400, 2)), rng.random((60, 2))
    vals = rng.normal(size=(400, 2))
    for j in range(6):
        s0, sv = h.window_sums(j, q, data, vals)
        d0, dv = dense_sums(h, j, q, data, vals)
        np.testing.assert_allclose(s0, d0, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(sv, dv, rtol=1e-12, atol=1e-11)


def test_window_sums_batch_independent():
    rng = np.random.default_rng(4)
    h = hier()
    data, q = rng.random(500), rng.random(40)
    vals = rng.normal(size=500)
    full = h.window_sums(3, q, data, vals)[1][:, 0]
    parts = np.concatenate([h.window_sums(3, q[i : i + 7], data, vals)[1][:, 0] for i in range(0, 40, 7)])
    assert np.array_equal(full, parts)


def test_callable_kernel_uses_dense_path():
    k = BaseKernel("tri", lambda u: np.clip(2 * (1 - u), 0, None) * (u <= 1))
    rng = np.random.default_rng(6)
    data, q = rng.random(200), rng.random(20)
    vals = rng.normal(size=200)
    a = hier(kernel=k).window_sums(2, q, data, vals)
    b = hier(kernel=triangular_kernel()).window_sums(2, q, data, vals)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-12)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-11, atol=1e-12)


def test_support_counts():
    h = hier(kernel=box_kernel())
    data = np.array([0.0, 0.1, 0.5, 0.95])
    np.testing.assert_array_equal(h.support_counts(3, [0.02], data), [3])
