"""Hypothesis strategies shared by the test modules."""

from __future__ import annotations

from fractions import Fraction

from hypothesis import strategies as st

from noacim.geometry import IntervalSet

DENOM = 64


@st.composite
def fractions_01(draw, denom: int = DENOM) -> Fraction:
    return Fraction(draw(st.integers(0, denom)), denom)


@st.composite
def interval_sets(draw, max_size: int = 5, denom: int = DENOM) -> IntervalSet:
    pairs = []
    for _ in range(draw(st.integers(0, max_size))):
        a, b = sorted((draw(fractions_01(denom)), draw(fractions_01(denom))))
        pairs.append((a, b))
    return IntervalSet(pairs)
