from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noacim import rokhlin
from noacim.geometry import IntervalSet
from noacim.maps import doubling, tripling

from strategies import interval_sets


def dyadic(a, b, n=64):
    return IntervalSet([(Fraction(a, n), Fraction(b, n))])


def test_is_n_good_and_refutation():
    f = doubling()
    Z = dyadic(1, 2, 8)  # [1/8, 1/4] -> f^{-1} lands in [1/16,1/8] u [9/16,5/8]
    good = rokhlin.is_n_good(f, Z, 3)
    assert good and good.N == 3
    bad = rokhlin.is_n_good(f, IntervalSet([(0, Fraction(1, 4))]), 2)
    assert not bad and bad.i == 1 and bad.overlap > 0


@settings(max_examples=40)
@given(interval_sets(max_size=3), st.integers(0, 5))
def test_hat_is_monotone_in_depth(Z, T):
    f = doubling()
    Z = Z.intersect(IntervalSet.unit())
    h0 = rokhlin.hat(f, Z, T).value
    h1 = rokhlin.hat(f, Z, T + 1).value
    assert Z.is_subset(h0) and h0.is_subset(h1)
    assert rokhlin.hat(f, Z, T).tail_bound == 1 - h0.measure()


@settings(max_examples=40)
@given(interval_sets(max_size=3), interval_sets(max_size=3), st.integers(0, 6))
def test_missing_from_hat_matches_explicit_hat(Z, S, depth):
    f = tripling()
    Z, S = Z.intersect(IntervalSet.unit()), S.intersect(IntervalSet.unit())
    explicit = S.subtract(rokhlin.hat(f, Z, depth).value).measure()
    assert rokhlin.missing_from_hat(f, Z, S, depth) == explicit


def test_merge_good_is_good_and_covers():
    f = doubling()
    A = rokhlin.is_n_good(f, dyadic(5, 7), 4)
    B = rokhlin.is_n_good(f, dyadic(6, 8), 4)
    assert A and B
    m = rokhlin.merge_good(f, A, B, 3, check_depth=12)
    assert rokhlin.is_n_good(f, m.C.Z, 4)
    assert m.missing == 0
    with pytest.raises(ValueError):
        rokhlin.merge_good(f, A, B, 2)


def test_residue_sums_and_keep_largest():
    assert rokhlin.residue_sums([1, 2, 3, 4, 5], 2, 1) == [9, 6]
    assert rokhlin.residue_sums([1, 2, 3, 4, 5], 2, 2) == [15, 15]
    U = IntervalSet([(0, Fraction(1, 8)), (Fraction(1, 4), Fraction(1, 2)), (Fraction(3, 4), Fraction(13, 16))])
    assert rokhlin.keep_largest(U, 2).intervals == ((0, Fraction(1, 8)), (Fraction(1, 4), Fraction(1, 2)))


def test_levels_of_doubling_preserve_measure():
    f = doubling()
    U = dyadic(1, 2, 8)
    levels = rokhlin.levels_of(f, U, 3)
    assert [lv.measure() for lv in levels] == [Fraction(1, 8)] * 3
    assert rokhlin.levels_pairwise_disjoint(levels)


def test_tower_config_validation():
    with pytest.raises(ValueError):
        rokhlin.TowerConfig(n0=2, l=3)
    with pytest.raises(ValueError):
        rokhlin.TowerConfig(n0=4, T=3)
    with pytest.raises(ValueError):
        rokhlin.TowerConfig(n0=4, eps0=Fraction(3, 2))


def test_small_tower_is_disjoint_and_reports():
    f = doubling()
    eps0 = Fraction(1, 4)
    tower = rokhlin.build_tower(f, 2, 1, eps0, 8, config=rokhlin.TowerConfig(n0=2, eps0=eps0, T=8, cap=50_000))
    assert tower.disjoint
    assert tower.coverage == sum(tower.level_measures)
    assert len(tower.ledger()) == 3
    assert tower.to_json()["checks"]["disjoint"]


def test_cap_is_enforced():
    with pytest.raises(rokhlin.ResourceCapError):
        rokhlin.hat(tripling(), dyadic(1, 2, 81), 12, cap=1000)
