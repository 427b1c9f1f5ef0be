import numpy as np
import pytest

from twinkernel import space as sp
from twinkernel.errors import CarrierEscapeError, PowerOverflowError
from twinkernel.twin_algebra import (
    BinaryOp,
    addition,
    is_linear_element,
    linear_subgroup_scan,
    maximum,
    midpoint,
    sample_pairs,
    twin_op,
    verify_twin_composition,
)

LINE = sp.real_line(-5, 5)
PAIRS = sample_pairs(LINE, 200, seed=1)


def test_twin_op_identity():
    for op in (addition, midpoint, maximum):
        for act in (sp.dilation(2.0), sp.translation(1.0), sp.rotation(0.3)):
            assert twin_op(op, act, 0, 0.3, 0.45) == float(op(np.float64(0.3), np.float64(0.45)))


def test_twin_op_examples():
    assert twin_op(addition, sp.dilation(2.0), 1, 3.0, 4.0) == pytest.approx(7.0)
    assert twin_op(addition, sp.translation(1.0), 1, 3.0, 4.0) == pytest.approx(8.0)


def test_twin_op_power_overflow():
    act = sp.translation(1.0)
    with pytest.raises(PowerOverflowError):
        twin_op(addition, act, act.max_power + 1, 0.0, 0.0)


def test_carrier_escape():
    outward = BinaryOp(lambda x, y: x - y - 10.0, "outward")
    with pytest.raises(CarrierEscapeError):
        twin_op(outward, sp.dilation(2.0), 1, 1.5, 2.0, space=sp.positive_half_line(1, 4))


def test_is_linear_examples():
    assert is_linear_element(addition, sp.translation(1.0), 0, PAIRS)
    for k in (-3, -1, 1, 5):
        assert is_linear_element(addition, sp.dilation(2.0), k, PAIRS)
    assert not is_linear_element(addition, sp.translation(1.0), 1, PAIRS)
    zero = (np.zeros((50, 1)), np.zeros((50, 1)))
    assert not is_linear_element(addition, sp.translation(1.0), 1, zero)


def test_is_linear_needs_enough_pairs():
    few = sample_pairs(LINE, 10)
    with pytest.raises(ValueError):
        is_linear_element(addition, sp.dilation(2.0), 1, few)


def test_scan_classifications():
    full = tuple(range(-3, 4))
    r = linear_subgroup_scan(addition, sp.trivial(), 3, PAIRS)
    assert r.linear_powers == full and r.is_subgroup_on_window
    r = linear_subgroup_scan(addition, sp.translation(1.0), 3, PAIRS)
    assert r.linear_powers == (0,) and r.is_subgroup_on_window
    r = linear_subgroup_scan(maximum, sp.translation(1.0), 3, PAIRS)
    assert r.linear_powers == full
    r = linear_subgroup_scan(addition, sp.dilation(2.0), 3, PAIRS)
    assert r.linear_powers == full


def test_scan_detects_period_on_circle():
    # addition on the circle under rotation by 1/4: phi^k preserves + iff k * 1/4 is an integer
    circ = sp.circle()
    pairs = sample_pairs(circ, 200, seed=2)
    r = linear_subgroup_scan(addition, sp.rotation(0.25), 8, pairs, space=circ)
    assert r.linear_powers == (-8, -4, 0, 4, 8)
    assert r.is_subgroup_on_window and r.period == 4
    assert r.coset_representatives == (0, 1, 2, 3)


def test_scan_report_invariants():
    for op in (addition, midpoint, maximum):
        for act in (sp.trivial(), sp.translation(0.5), sp.dilation(2.0)):
            r = linear_subgroup_scan(op, act, 4, PAIRS)
            assert 0 in r.linear_powers
            if r.is_subgroup_on_window:
                assert set(r.linear_powers) == {-k for k in r.linear_powers}


def test_composition_identity_on_random_tuples():
    rng = np.random.default_rng(9)
    half = sp.positive_half_line(0.5, 8)
    cases = [
        (addition, sp.dilation(2.0), LINE, None),
        (addition, sp.translation(1.0), LINE, None),
        (midpoint, sp.dilation(2.0), LINE, None),
        (maximum, sp.translation(1.0), LINE, None),
        (midpoint, sp.dilation(2.0), half, None),
        (addition, sp.rotation(0.618), sp.circle(), sp.circle()),
        (addition, sp.trivial(), LINE, None),
    ]
    for op, act, space, carrier in cases:
        xs, ys = sample_pairs(space, 200, seed=int(rng.integers(1 << 30)))
        for _ in range(10):
            k, m = (int(v) for v in rng.integers(-4, 5, size=2))
            assert verify_twin_composition(op, act, k, m, (xs, ys), 1e-9, carrier)


def test_composition_examples():
    assert verify_twin_composition(addition, sp.translation(1.0), 0, 0, PAIRS)
    assert verify_twin_composition(addition, sp.dilation(2.0), 1, 2, PAIRS)
    assert verify_twin_composition(addition, sp.translation(1.0), 1, 1, PAIRS)


def test_report_to_dict():
    d = linear_subgroup_scan(addition, sp.translation(1.0), 2, PAIRS).to_dict()
    assert d["linear_powers"] == [0] and d["tested_powers"] == [-2, 2]
