from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noacim.geometry import IntervalSet
from noacim.linearize import check_locally_linear, linearize_on, vitali_cover
from noacim.maps import c1_distance_lower, doubling, surrogate

from strategies import interval_sets


@settings(max_examples=50)
@given(interval_sets(max_size=4), st.integers(1, 9), st.integers(1, 64))
def test_vitali_cover_is_disjoint_inside_and_dense(U, g, r):
    gamma, r0 = Fraction(g, 10), Fraction(1, r)
    cov = vitali_cover(U, gamma, r0)
    pieces = sorted((p - s, p + s) for p, s in cov.balls)
    assert all(b[0] > a[1] for a, b in zip(pieces, pieces[1:]))
    assert cov.union.is_subset(U)
    assert all(s < r0 for _, s in cov.balls)
    if U.measure():
        assert cov.covered_fraction > 1 - gamma / 2


def test_affine_map_needs_no_patches():
    lin = linearize_on(doubling(), IntervalSet.unit(), Fraction(1, 5), Fraction(1, 100))
    assert lin.f_tilde is not None and lin.c1_bound == 0
    assert check_locally_linear(lin.f_tilde, lin.V)


def test_surrogate_linearization():
    f = surrogate()
    lin = linearize_on(f, IntervalSet([(Fraction(1, 10), Fraction(9, 10))]), Fraction(1, 5), Fraction(1, 200))
    assert lin.ratio > Fraction(4, 5)
    assert check_locally_linear(lin.f_tilde, lin.V)
    assert not check_locally_linear(f, lin.V)
    assert c1_distance_lower(f, lin.f_tilde) <= lin.c1_bound


def test_delta_must_be_small():
    with pytest.raises(ValueError):
        linearize_on(surrogate(), IntervalSet.unit(), Fraction(1, 5), Fraction(1, 100), delta=Fraction(1, 10))
