import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from ruinlab.geometry import Allocation, RuinSetKind, RuinSetSpec, build_gauge, contains, gauge_project

HALF = Allocation((0.5, 0.5))


def test_sum_negative_directions():
    A = build_gauge(RuinSetSpec.sum_negative(2), HALF)
    np.testing.assert_allclose(A.directions, [[1.0, 1.0]])
    assert A.single_direction and not A.axis_aligned


def test_any_negative_directions():
    A = build_gauge(RuinSetSpec.any_negative(2), HALF)
    np.testing.assert_allclose(A.directions, [[2.0, 0.0], [0.0, 2.0]])
    assert A.axis_aligned
    np.testing.assert_allclose(A.axis_coefficients(), [2.0, 2.0])


def test_custom_directions_rescaled_by_p_dot_b():
    A = build_gauge(RuinSetSpec.custom([[2.0, 2.0]]), HALF)
    np.testing.assert_allclose(A.directions, [[1.0, 1.0]])


def test_projection_examples():
    L1 = build_gauge(RuinSetSpec.sum_negative(2), HALF)
    L2 = build_gauge(RuinSetSpec.any_negative(2), HALF)
    assert gauge_project(L1, [2.0, 3.0]) == pytest.approx(5.0)
    assert gauge_project(L2, [1.0, 3.0]) == pytest.approx(6.0)
    assert gauge_project(L1, [0.0, 0.0]) == 0.0
    assert gauge_project(L2, [0.0, 0.0]) == 0.0


def test_contains_examples():
    L1 = build_gauge(RuinSetSpec.sum_negative(2), HALF)
    L2 = build_gauge(RuinSetSpec.any_negative(2), HALF)
    assert not contains(L1, [3.0, 0.0], 2.0, shift=[0.5, 0.5])  # boundary: A is open
    assert contains(L1, [3.1, 0.0], 2.0, shift=[0.5, 0.5])
    assert contains(L2, [1.01, 0.0], 2.0)


def test_allocation_validation():
    with pytest.raises(ValueError):
        Allocation((0.5, 0.6))
    with pytest.raises(ValueError):
        Allocation((1.5, -0.5))
    with pytest.raises(ValueError):
        RuinSetSpec(RuinSetKind.CUSTOM, 2)


def test_dimension_mismatch():
    A = build_gauge(RuinSetSpec.sum_negative(2), HALF)
    with pytest.raises(ValueError):
        gauge_project(A, [1.0, 2.0, 3.0])


weights = st.lists(st.floats(0.05, 1.0), min_size=2, max_size=4).map(lambda w: tuple(np.array(w) / sum(w)))
points = st.lists(st.floats(-50, 50), min_size=4, max_size=4)


@given(weights, points, st.floats(0.1, 10.0), st.sampled_from(["L1", "L2"]))
def test_projection_is_positively_homogeneous(b, z, t, kind):
    d = len(b)
    spec = RuinSetSpec.sum_negative(d) if kind == "L1" else RuinSetSpec.any_negative(d)
    A = build_gauge(spec, Allocation(b))
    z = np.array(z[:d])
    assert gauge_project(A, t * z) == pytest.approx(t * gauge_project(A, z), rel=1e-9, abs=1e-9)


@given(weights, st.sampled_from(["L1", "L2"]))
def test_allocation_sits_on_the_boundary(b, kind):
    """The capital split b itself projects to exactly 1: p_k . b = 1 for the binding direction."""
    d = len(b)
    spec = RuinSetSpec.sum_negative(d) if kind == "L1" else RuinSetSpec.any_negative(d)
    A = build_gauge(spec, Allocation(b))
    assert gauge_project(A, np.array(b)) == pytest.approx(1.0)


@given(weights, points, st.floats(0.1, 20.0))
def test_l2_contains_matches_any_line_ruined(b, z, x):
    d = len(b)
    A = build_gauge(RuinSetSpec.any_negative(d), Allocation(b))
    z = np.array(z[:d])
    assume(not np.any(np.isclose(z, x * np.array(b))))
    # line j is ruined when its claim total exceeds its capital x * b_j
    assert bool(contains(A, z, x)) == bool(np.any(z > x * np.array(b)))


@given(weights, points, st.floats(0.1, 20.0))
def test_l1_contains_matches_total_capital(b, z, x):
    d = len(b)
    A = build_gauge(RuinSetSpec.sum_negative(d), Allocation(b))
    z = np.array(z[:d])
    assume(not np.isclose(z.sum(), x))
    assert bool(contains(A, z, x)) == bool(z.sum() > x)
