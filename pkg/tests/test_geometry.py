from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noacim.geometry import (
    BoxSet,
    DimensionError,
    IntervalSet,
    as_scalar,
    scalar_json,
    scalar_str,
    set_from_json,
)

from strategies import interval_sets


def test_as_scalar_forms():
    assert as_scalar("3/4") == Fraction(3, 4)
    assert as_scalar(0.5) == Fraction(1, 2)
    assert as_scalar(Fraction(2, 6)) == Fraction(1, 3)
    assert scalar_str(as_scalar("6/3")) == "2"
    assert scalar_json(as_scalar("1/8")) == {"exact": "1/8", "decimal": 0.125}
    with pytest.raises(TypeError):
        as_scalar(True)


def test_canonical_merges_touching_and_drops_empty():
    S = IntervalSet([(0, Fraction(1, 4)), (Fraction(1, 4), Fraction(1, 2)), (Fraction(3, 4), Fraction(3, 4))])
    assert S.intervals == ((0, Fraction(1, 2)),)
    assert S.measure() == Fraction(1, 2)
    with pytest.raises(ValueError):
        IntervalSet([(1, 0)])


@given(interval_sets(), interval_sets())
def test_inclusion_exclusion(A, B):
    assert A.union(B).measure() + A.intersect(B).measure() == A.measure() + B.measure()


@given(interval_sets(), interval_sets())
def test_subtract_is_complementary(A, B):
    diff = A.subtract(B)
    assert diff.measure() == A.measure() - A.intersect(B).measure()
    assert diff.is_subset(A)
    assert diff.interiors_disjoint(B)


@given(interval_sets())
def test_complement_in_unit(A):
    assert A.complement_in_unit().measure() == 1 - A.intersect(IntervalSet.unit()).measure()


@given(interval_sets(), interval_sets())
def test_subset_agrees_with_difference(A, B):
    assert A.is_subset(B) == A.subtract(B).is_empty()


@given(interval_sets(), st.integers(1, 16))
def test_shrink_loses_at_most_2s_per_component(A, k):
    s = Fraction(1, 64 * k)
    S = A.shrink(s)
    assert S.is_subset(A)
    assert A.measure() - S.measure() <= 2 * s * len(A)


@given(interval_sets())
def test_json_roundtrip(A):
    assert set_from_json(A.to_json()) == A


def test_closures_disjoint_on_circle():
    a = IntervalSet([(0, Fraction(1, 4))])
    b = IntervalSet([(Fraction(3, 4), 1)])
    assert a.closures_disjoint(b)
    assert not a.closures_disjoint(b, circle=True)


def test_boxset_measure_and_dimension_guard():
    A = BoxSet(2, [[(0, Fraction(1, 2)), (0, 1)]])
    B = BoxSet(2, [[(Fraction(1, 4), 1), (0, Fraction(1, 2))]])
    assert A.union(B).measure() + A.intersect(B).measure() == A.measure() + B.measure()
    assert A.complement_in_unit().measure() == Fraction(1, 2)
    with pytest.raises(DimensionError):
        A.union(BoxSet(3, []))


@settings(max_examples=30)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7)), max_size=4))
def test_boxset_subtract_measure(cells):
    boxes = [[(Fraction(i, 8), Fraction(i + 1, 8)), (Fraction(j, 8), Fraction(j + 1, 8))] for i, j in cells]
    A = BoxSet(2, boxes)
    B = BoxSet(2, [[(0, Fraction(1, 2)), (0, Fraction(1, 2))]])
    assert A.subtract(B).measure() == A.measure() - A.intersect(B).measure()
