import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from noacim.geometry import IntervalSet
from noacim.maps import (
    Bump,
    CompressorPatch,
    NotExactError,
    PatchedMap,
    c1_distance_bound,
    c1_distance_lower,
    doubling,
    half_contraction,
    identity,
    map_from_json,
    rotation,
    surrogate,
    tripling,
)

from strategies import fractions_01, interval_sets


@given(interval_sets())
def test_doubling_preserves_lebesgue_on_preimages(S):
    f = doubling()
    S = S.intersect(IntervalSet.unit())
    assert f.preimage(S).measure() == S.measure()


@given(interval_sets())
def test_image_of_preimage(S):
    f = tripling()
    S = S.intersect(IntervalSet.unit())
    assert f.image(f.preimage(S)).is_subset(S) or S.is_empty()


@given(fractions_01())
def test_lift_and_evaluate(x):
    f = doubling()
    assert f.evaluate(x) == (2 * x) % 1 or (x == 1 and f.evaluate(x) == 0)
    assert f.derivative(x) == 2


def test_structure():
    f = doubling()
    assert f.is_exact and f.is_expanding()
    assert f.nonsingularity_constant() == 1
    assert [(s.lo, s.hi) for s in f.sub_branches()] == [(0, Fraction(1, 2)), (Fraction(1, 2), 1)]
    assert not identity().is_expanding()
    assert not surrogate().is_exact
    with pytest.raises(NotExactError):
        surrogate().preimage(IntervalSet.unit())


def test_arrays_match_exact():
    f = surrogate()
    xs = [Fraction(k, 37) for k in range(37)]
    arr = f.evaluate_array(np.array([float(x) for x in xs]))
    assert np.allclose(arr, [float(f.evaluate(x)) for x in xs], atol=1e-12)


@given(st.fractions(Fraction(-1), Fraction(1)))
def test_bump_shape(x):
    b = Bump(Fraction(1, 4))
    v = b.value(x)
    assert 0 <= v <= 1
    assert abs(b.deriv(x)) <= b.sup_deriv
    if abs(x) <= Fraction(3, 4):
        assert v == 1


def test_bump_derivative_matches_difference_quotient():
    b = Bump(Fraction(1, 3))
    x, h = Fraction(5, 6), Fraction(1, 10**9)
    fd = (b.value(x + h) - b.value(x - h)) / (2 * h)
    assert abs(fd - b.deriv(x)) < Fraction(1, 10**6)


def test_compressor_patch():
    p = CompressorPatch(Fraction(1, 4), Fraction(1, 16), Fraction(1, 2), Bump(Fraction(1, 4)), Fraction(2))
    assert p.h(p.lo) == p.lo and p.h(p.hi) == p.hi
    inner = Fraction(1, 4) + Fraction(1, 32)
    assert p.h(inner) - p.center == (inner - p.center) / 2
    xs = [p.lo + (p.hi - p.lo) * Fraction(k, 50) for k in range(51)]
    assert all(a < b for a, b in zip(map(p.h, xs), map(p.h, xs[1:])))
    g = PatchedMap(doubling(), [p])
    assert c1_distance_lower(doubling(), g) <= c1_distance_bound(doubling(), g)
    S = IntervalSet([(p.center - Fraction(1, 64), p.center + Fraction(1, 64))])
    assert g.image(S).measure() == S.measure()  # contracted by 1/2, expanded by 2


def test_overlapping_patches_rejected():
    b = Bump(Fraction(1, 4))
    p = CompressorPatch(Fraction(1, 4), Fraction(1, 8), Fraction(1, 2), b, Fraction(2))
    q = CompressorPatch(Fraction(3, 8), Fraction(1, 8) + Fraction(1, 100), Fraction(1, 2), b, Fraction(2))
    with pytest.raises(ValueError):
        PatchedMap(doubling(), [p, q])


def test_affine_c1_distance():
    assert c1_distance_bound(rotation("1/10"), identity()) == Fraction(1, 10)
    assert c1_distance_bound(doubling(), doubling()) == 0


@pytest.mark.parametrize("factory", [doubling, tripling, half_contraction, surrogate])
def test_json_roundtrip(factory):
    f = factory()
    g = map_from_json(json.loads(json.dumps(f.to_json())))
    xs = [Fraction(k, 29) for k in range(29)]
    assert [f.evaluate(x) for x in xs] == [g.evaluate(x) for x in xs]
