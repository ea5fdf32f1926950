"""Local linearisation of a circle map on most of an open set.

A greedy packing of disjoint intervals (a one-dimensional Vitali cover) is
placed inside the target set and on each interval the map is blended with its
tangent map through a C¹ bump.  The result agrees with the original map off
the packing, is exactly affine on the inner part of every interval and is
C¹-close to the original with an explicit, certified bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .geometry import ONE, ZERO, IntervalSet, as_scalar, scalar_json, scalar_str
from .maps import AffineBranch, AnyMap, Bump, CircleMap, LinearizationPatch, PatchedMap

__all__ = [
    "VitaliCover",
    "Linearization",
    "vitali_cover",
    "linearize_on",
    "check_locally_linear",
]


@dataclass(frozen=True)
class VitaliCover:
    """Disjoint closed intervals ``[p - r, p + r]`` inside the open set ``U``."""

    target: IntervalSet
    balls: tuple[tuple[Fraction, Fraction], ...]  # (centre, radius)
    gamma: Fraction
    r0: Fraction
    shrunk: bool  # some component was shorter than a ball of radius r0

    @property
    def union(self) -> IntervalSet:
        return IntervalSet.from_pairs([(p - r, p + r) for p, r in self.balls])

    @property
    def covered_fraction(self) -> Fraction:
        m = self.target.measure()
        return self.union.measure() / m if m else ONE

    def to_json(self) -> dict:
        return {
            "target": self.target.to_json(),
            "balls": [[scalar_str(p), scalar_str(r)] for p, r in self.balls],
            "gamma": scalar_str(self.gamma),
            "r0": scalar_str(self.r0),
            "shrunk": self.shrunk,
            "covered_fraction": scalar_json(self.covered_fraction),
        }


def _split(U: IntervalSet, cuts) -> list[tuple[Fraction, Fraction]]:
    pieces = []
    for lo, hi in U.intervals:
        inner = sorted(c for c in cuts if lo < c < hi)
        edges = [lo, *inner, hi]
        pieces.extend(zip(edges, edges[1:]))
    return pieces


def vitali_cover(U: IntervalSet, gamma: Fraction, r0: Fraction, cuts=()) -> VitaliCover:
    """Greedy left-to-right packing of every component of ``U`` (optionally cut at ``cuts``).

    A component of length ``L`` receives ``m = ceil(L / 2 r0)`` equal slots,
    each holding a centred interval of radius ``L/(2m) * (1 - gamma/8)``; the
    closed intervals therefore sit strictly inside the open component, have
    radius ``< r0`` and cover a fraction ``1 - gamma/8 > 1 - gamma/2`` of ``U``.
    """
    gamma, r0 = as_scalar(gamma), as_scalar(r0)
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    fill = 1 - gamma / 8
    balls = []
    shrunk = False
    for lo, hi in _split(U, cuts):
        length = hi - lo
        m = max(1, math.ceil(length / (2 * r0)))
        shrunk = shrunk or length <= 2 * r0  # radius forced below L/2 rather than r0
        slot = length / m
        r = slot / 2 * fill
        for j in range(m):
            balls.append((lo + slot * j + slot / 2, r))
    return VitaliCover(U, tuple(balls), gamma, r0, shrunk)


@dataclass
class Linearization:
    f_tilde: AnyMap
    V: IntervalSet
    cover: VitaliCover
    delta: Fraction
    ratio: Fraction  # m(V) / m(U)
    c1_bound: Fraction  # certified bound on the C¹ distance between f and f_tilde

    def to_json(self) -> dict:
        return {
            "f_tilde": self.f_tilde.to_json(),
            "V": self.V.to_json(),
            "cover": self.cover.to_json(),
            "delta": scalar_str(self.delta),
            "ratio": scalar_json(self.ratio),
            "c1_bound": scalar_json(self.c1_bound),
        }


def linearize_on(f: CircleMap, U: IntervalSet, gamma: Fraction, r0: Fraction,
                 delta: Fraction | None = None) -> Linearization:
    """Blend ``f`` with its tangent maps on a Vitali cover of ``U``.

    ``delta`` (the bump transition width, default ``gamma/4``) must satisfy
    ``1 - delta > 1 - gamma/2`` so that the inner zones keep a ``> 1 - gamma``
    share of ``U``.  Components are first cut at the break points of ``f`` so
    every centre is a smooth point.  On affine branches the tangent blend is
    the identity operation, so no patch is emitted there.
    """
    gamma, r0 = as_scalar(gamma), as_scalar(r0)
    delta = gamma / 4 if delta is None else as_scalar(delta)
    if not 0 < delta < gamma / 2:
        raise ValueError("need 0 < delta < gamma/2")
    if not U.is_subset(IntervalSet.unit()):
        raise ValueError("U must lie in [0, 1]")
    cover = vitali_cover(U, gamma, r0, cuts=f.break_points())
    bump = Bump(delta)
    patches = []
    inner = []
    second: dict[int, Fraction] = {}  # certified sup |f''| per branch
    for p, r in cover.balls:
        k = f.branch_index(p)
        branch = f.branches[k]
        w = (1 - delta) * r
        inner.append((p - w, p + w))
        if isinstance(branch, AffineBranch):
            continue
        slope = branch.deriv(p)
        if slope == 0:
            raise ValueError(f"critical centre {p}: derivative vanishes")
        if k not in second:
            second[k] = branch.sup_abs_second()
        patches.append(LinearizationPatch(p, r, bump, branch.lift(p), slope, second[k]))
    f_tilde = PatchedMap(f, patches, name=f"linearized({f.name})") if patches else f
    V = IntervalSet.from_pairs(inner)
    mU = U.measure()
    ratio = V.measure() / mU if mU else ONE
    bound = max((q.c1_bound() for q in patches), default=ZERO)
    return Linearization(f_tilde, V, cover, delta, ratio, bound)


def _affine_on(g: AnyMap, lo: Fraction, hi: Fraction):
    """The (slope, intercept) of ``g``'s lift on ``[lo, hi]`` if it is affine there, else ``None``."""
    if isinstance(g, PatchedMap):
        hits = [p for p in g.patches if p.lo < hi and p.hi > lo]
        if not hits:
            return _affine_on(g.base, lo, hi)
        if len(hits) == 1 and isinstance(hits[0], LinearizationPatch):
            p = hits[0]
            a, b = p.inner
            if a <= lo and hi <= b:
                return (p.slope, p.value - p.slope * p.center)
        return None
    k = g.branch_index(lo)
    b = g.branches[k]
    if hi > b.hi or not isinstance(b, AffineBranch):
        return None
    return (b.slope, b.offset)


def check_locally_linear(g: AnyMap, V: IntervalSet) -> bool:
    """True iff on every component of ``V`` the lift of ``g`` is a single affine map."""
    return all(_affine_on(g, lo, hi) is not None for lo, hi in V.intervals)
