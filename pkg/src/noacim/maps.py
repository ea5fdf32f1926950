"""Circle maps with exact preimages, bump functions and bump-patched C¹ maps.

The phase space is the circle ``[0, 1)`` (``mod1=True``) or the interval
``[0, 1]`` (``mod1=False``).  A :class:`CircleMap` is a list of branches that
partition ``[0, 1)``.  Each branch carries a *lift*: a real function on its
domain that is continuous there, and whose reduction mod 1 is the map.  Two
kinds of branch exist:

* :class:`AffineBranch` -- ``x -> slope*x + offset``.  Preimages and images of
  interval sets are exact.
* :class:`PolyBranch` -- a polynomial with rational coefficients.  Values are
  exact, images of intervals are exact on certified-monotone pieces, and the
  second derivative has a certified bound (interval arithmetic).

A :class:`PatchedMap` replaces a base map on finitely many disjoint intervals by
closed-form C¹ patches (affine blends or compressors).  Every patch is
monotone with rational-valued closed form, so images stay exact.
"""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import numpy as np

from .geometry import ONE, ZERO, IntervalSet, ScalarLike, as_scalar, mpq, scalar_str


class NotExactError(ValueError):
    """An exact-mode operation touched a region without closed-form inverse."""


class BreakPointError(ValueError):
    """Derivative requested at a point where one-sided derivatives differ."""


# ---------------------------------------------------------------------------
# bump profile
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Bump:
    """Even C¹ bump: 1 on ``|x| <= 1 - delta``, 0 on ``|x| >= 1``, smoothstep between."""

    delta: Fraction

    def __post_init__(self):
        d = as_scalar(self.delta)
        if not 0 < d < 1:
            raise ValueError("bump parameter must lie in (0, 1)")
        object.__setattr__(self, "delta", d)

    @property
    def sup_deriv(self) -> Fraction:
        return mpq(3, 2) / self.delta

    def value(self, x: Fraction) -> Fraction:
        ax = abs(x)
        if ax <= 1 - self.delta:
            return ONE
        if ax >= 1:
            return ZERO
        s = (1 - ax) / self.delta
        return s * s * (3 - 2 * s)

    def deriv(self, x: Fraction) -> Fraction:
        ax = abs(x)
        if ax <= 1 - self.delta or ax >= 1:
            return ZERO
        s = (1 - ax) / self.delta
        ds = 6 * s * (1 - s) / self.delta
        return -ds if x > 0 else ds

    def value_array(self, x: np.ndarray) -> np.ndarray:
        d = float(self.delta)
        s = np.clip((1.0 - np.abs(x)) / d, 0.0, 1.0)
        return s * s * (3.0 - 2.0 * s)

    def deriv_array(self, x: np.ndarray) -> np.ndarray:
        d = float(self.delta)
        s = np.clip((1.0 - np.abs(x)) / d, 0.0, 1.0)
        return -np.sign(x) * 6.0 * s * (1.0 - s) / d


# ---------------------------------------------------------------------------
# polynomial helpers (coefficients in ascending order)
# ---------------------------------------------------------------------------


def _poly_eval(coeffs: Sequence[Fraction], x: Fraction) -> Fraction:
    acc = ZERO
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_deriv(coeffs: Sequence[Fraction]) -> tuple[Fraction, ...]:
    return tuple(k * c for k, c in enumerate(coeffs) if k > 0) or (ZERO,)


def _poly_range(coeffs: Sequence[Fraction], lo: Fraction, hi: Fraction) -> tuple[Fraction, Fraction]:
    """Certified enclosure of the polynomial on ``[lo, hi]`` (monomial-wise)."""
    rlo = rhi = ZERO
    for k, c in enumerate(coeffs):
        if c == 0:
            continue
        a, b = lo**k, hi**k
        mlo, mhi = (a, b) if a <= b else (b, a)
        if k % 2 == 0 and lo < 0 < hi:
            mlo = ZERO
        if c > 0:
            rlo, rhi = rlo + c * mlo, rhi + c * mhi
        else:
            rlo, rhi = rlo + c * mhi, rhi + c * mlo
    return rlo, rhi


def poly_sup_abs(coeffs: Sequence[Fraction], lo: Fraction, hi: Fraction, pieces: int = 64) -> Fraction:
    """Certified upper bound of ``|p|`` on ``[lo, hi]`` by subdivided interval evaluation."""
    best = ZERO
    step = (hi - lo) / pieces
    for j in range(pieces):
        a, b = _poly_range(coeffs, lo + j * step, lo + (j + 1) * step)
        best = max(best, abs(a), abs(b))
    return best


def _poly_inf_abs(coeffs: Sequence[Fraction], lo: Fraction, hi: Fraction, pieces: int = 64) -> Fraction:
    """Certified lower bound of ``|p|`` on ``[lo, hi]`` (0 when a sign change is possible)."""
    best = None
    step = (hi - lo) / pieces
    for j in range(pieces):
        a, b = _poly_range(coeffs, lo + j * step, lo + (j + 1) * step)
        if a <= 0 <= b:
            return ZERO
        m = min(abs(a), abs(b))
        best = m if best is None else min(best, m)
    return best if best is not None else ZERO


# ---------------------------------------------------------------------------
# branches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineBranch:
    """``x -> slope*x + offset`` on ``[lo, hi)``."""

    lo: Fraction
    hi: Fraction
    slope: Fraction
    offset: Fraction

    def __post_init__(self):
        for name in ("lo", "hi", "slope", "offset"):
            object.__setattr__(self, name, as_scalar(getattr(self, name)))
        if not self.lo < self.hi:
            raise ValueError("empty branch domain")

    kind = "affine"

    def lift(self, x: Fraction) -> Fraction:
        return self.slope * x + self.offset

    def deriv(self, x: Fraction) -> Fraction:
        return self.slope

    def lift_range(self) -> tuple[Fraction, Fraction]:
        a, b = self.lift(self.lo), self.lift(self.hi)
        return (a, b) if a <= b else (b, a)

    def sup_abs_deriv(self, lo: Fraction | None = None, hi: Fraction | None = None) -> Fraction:
        return abs(self.slope)

    def inf_abs_deriv(self, lo: Fraction | None = None, hi: Fraction | None = None) -> Fraction:
        return abs(self.slope)

    def sup_abs_second(self) -> Fraction:
        return ZERO

    def to_json(self) -> dict:
        return {
            "dom": [scalar_str(self.lo), scalar_str(self.hi)],
            "slope": scalar_str(self.slope),
            "offset": scalar_str(self.offset),
        }


@dataclass(frozen=True)
class PolyBranch:
    """Polynomial lift ``sum c_k x^k`` on ``[lo, hi)`` (coefficients ascending)."""

    lo: Fraction
    hi: Fraction
    coeffs: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "lo", as_scalar(self.lo))
        object.__setattr__(self, "hi", as_scalar(self.hi))
        object.__setattr__(self, "coeffs", tuple(as_scalar(c) for c in self.coeffs))
        if not self.lo < self.hi:
            raise ValueError("empty branch domain")

    kind = "poly"

    @property
    def dcoeffs(self) -> tuple[Fraction, ...]:
        return _poly_deriv(self.coeffs)

    @property
    def ddcoeffs(self) -> tuple[Fraction, ...]:
        return _poly_deriv(self.dcoeffs)

    def lift(self, x: Fraction) -> Fraction:
        return _poly_eval(self.coeffs, x)

    def deriv(self, x: Fraction) -> Fraction:
        return _poly_eval(self.dcoeffs, x)

    def second(self, x: Fraction) -> Fraction:
        return _poly_eval(self.ddcoeffs, x)

    def lift_range(self) -> tuple[Fraction, Fraction]:
        return _poly_range(self.coeffs, self.lo, self.hi)

    def sup_abs_deriv(self, lo: Fraction | None = None, hi: Fraction | None = None) -> Fraction:
        return poly_sup_abs(self.dcoeffs, self.lo if lo is None else lo, self.hi if hi is None else hi)

    def inf_abs_deriv(self, lo: Fraction | None = None, hi: Fraction | None = None) -> Fraction:
        return _poly_inf_abs(self.dcoeffs, self.lo if lo is None else lo, self.hi if hi is None else hi)

    def sup_abs_second(self) -> Fraction:
        """Certified bound on ``sup |p''|`` over the branch domain."""
        return poly_sup_abs(self.ddcoeffs, self.lo, self.hi)

    def to_json(self) -> dict:
        return {"dom": [scalar_str(self.lo), scalar_str(self.hi)], "coeffs": [scalar_str(c) for c in self.coeffs]}


Branch = Union[AffineBranch, PolyBranch]


@dataclass(frozen=True)
class _SubBranch:
    """Affine piece on which the reduction mod 1 uses a single integer shift."""

    lo: Fraction
    hi: Fraction
    slope: Fraction
    offset: Fraction  # already includes the integer shift

    def forward(self, x: Fraction) -> Fraction:
        return self.slope * x + self.offset

    def inverse(self, y: Fraction) -> Fraction:
        return (y - self.offset) / self.slope

    @property
    def range(self) -> tuple[Fraction, Fraction]:
        a, b = self.forward(self.lo), self.forward(self.hi)
        return (a, b) if a <= b else (b, a)


def _split_at_integers(lo: Fraction, hi: Fraction) -> list[tuple[Fraction, Fraction, int]]:
    """Split ``[lo, hi]`` at integers; returns ``(a, b, m)`` with ``[a, b] ⊆ [m, m+1]``."""
    out = []
    m = math.floor(lo)
    while m < hi:
        a = max(lo, mpq(m))
        b = min(hi, mpq(m + 1))
        if b > a:
            out.append((a, b, m))
        m += 1
    return out


# ---------------------------------------------------------------------------
# circle maps
# ---------------------------------------------------------------------------


class CircleMap:
    """A self-map of the circle (or of ``[0, 1]``) given by branches partitioning ``[0, 1)``."""

    def __init__(self, branches: Sequence[Branch], mod1: bool = True, name: str = "map"):
        branches = sorted(branches, key=lambda b: b.lo)
        if not branches:
            raise ValueError("a map needs at least one branch")
        if branches[0].lo != 0 or branches[-1].hi != 1:
            raise ValueError("branch domains must cover [0, 1)")
        for left, right in zip(branches, branches[1:]):
            if left.hi != right.lo:
                raise ValueError("branch domains must partition [0, 1) without gaps or overlaps")
        for b in branches:
            if isinstance(b, AffineBranch) and b.slope == 0:
                raise ValueError("constant branches are not allowed")
        self.branches: tuple[Branch, ...] = tuple(branches)
        self.mod1 = mod1
        self.name = name
        self._los = [b.lo for b in self.branches]
        self._sub: list[_SubBranch] | None = None
        if not mod1:
            for b in self.branches:
                lo, hi = b.lift_range()
                if lo < 0 or hi > 1:
                    raise ValueError("an interval map must send [0, 1] into itself")

    # -- structure ------------------------------------------------------------
    @property
    def is_exact(self) -> bool:
        return all(isinstance(b, AffineBranch) for b in self.branches)

    @property
    def base(self) -> None:
        return None

    def branch_index(self, x: Fraction) -> int:
        if not 0 <= x <= 1:
            raise ValueError(f"point {x} outside [0, 1]")
        if x == 1:
            return len(self.branches) - 1
        return bisect.bisect_right(self._los, x) - 1

    def break_points(self) -> list[Fraction]:
        return [b.lo for b in self.branches]

    def sub_branches(self) -> list[_SubBranch]:
        """Affine pieces on which ``f`` (reduced mod 1) is a single affine bijection."""
        if not self.is_exact:
            raise NotExactError("sub-branches exist only for affine maps")
        if self._sub is None:
            subs = []
            for b in self.branches:
                ylo, yhi = b.lift_range()
                pieces = _split_at_integers(ylo, yhi) if self.mod1 else [(ylo, yhi, 0)]
                for a, c, m in pieces:
                    xa, xc = (a - b.offset) / b.slope, (c - b.offset) / b.slope
                    if xa > xc:
                        xa, xc = xc, xa
                    subs.append(_SubBranch(xa, xc, b.slope, b.offset - m))
            subs.sort(key=lambda s: s.lo)
            self._sub = subs
        return self._sub

    def nonsingularity_constant(self) -> Fraction:
        """``sigma`` with ``m(f^{-1} S) <= sigma * m(S)`` for every measurable ``S``."""
        if self.is_exact:
            return sum((1 / abs(s.slope) for s in self.sub_branches()), ZERO)
        total = ZERO
        for b in self.branches:
            ylo, yhi = b.lift_range()
            sheets = len(_split_at_integers(ylo, yhi)) if self.mod1 else 1
            inf = b.inf_abs_deriv()
            if inf == 0:
                raise ValueError("branch with possibly vanishing derivative")
            total += sheets / inf
        return total

    def min_abs_slope(self) -> Fraction:
        return min(b.inf_abs_deriv() for b in self.branches)

    def is_expanding(self) -> bool:
        return self.min_abs_slope() > 1

    # -- evaluation -------------------------------------------------------------
    def lift(self, x: ScalarLike) -> Fraction:
        x = as_scalar(x)
        return self.branches[self.branch_index(x)].lift(x)

    def evaluate(self, x: ScalarLike) -> Fraction:
        y = self.lift(x)
        return y - math.floor(y) if self.mod1 else y

    __call__ = evaluate

    def derivative(self, x: ScalarLike) -> Fraction:
        x = as_scalar(x)
        i = self.branch_index(x)
        right = self.branches[i].deriv(x)
        if x == self.branches[i].lo:
            if i > 0:
                left = self.branches[i - 1].deriv(x)
            elif self.mod1:
                left = self.branches[-1].deriv(ONE)
            else:
                left = right
            if left != right:
                raise BreakPointError(f"one-sided derivatives differ at {x}: {left} vs {right}")
        return right

    def local_sup_abs_deriv(self, lo: Fraction, hi: Fraction) -> Fraction:
        i = self.branch_index(lo)
        return self.branches[i].sup_abs_deriv(lo, hi)

    # -- vectorised float evaluation -----------------------------------------------
    def _float_tables(self):
        if not hasattr(self, "_ftab"):
            los = np.array([float(b.lo) for b in self.branches])
            polys = []
            for b in self.branches:
                if isinstance(b, AffineBranch):
                    polys.append(np.array([float(b.slope), float(b.offset)]))
                else:
                    polys.append(np.array([float(c) for c in reversed(b.coeffs)]))
            self._ftab = (los, polys)
        return self._ftab

    def lift_array(self, x: np.ndarray) -> np.ndarray:
        los, polys = self._float_tables()
        idx = np.clip(np.searchsorted(los, x, side="right") - 1, 0, len(los) - 1)
        out = np.empty_like(x, dtype=float)
        for j, p in enumerate(polys):
            mask = idx == j
            if mask.any():
                out[mask] = np.polyval(p, x[mask])
        return out

    def deriv_array(self, x: np.ndarray) -> np.ndarray:
        los, polys = self._float_tables()
        idx = np.clip(np.searchsorted(los, x, side="right") - 1, 0, len(los) - 1)
        out = np.empty_like(x, dtype=float)
        for j, p in enumerate(polys):
            mask = idx == j
            if mask.any():
                out[mask] = np.polyval(np.polyder(p), x[mask])
        return out

    def evaluate_array(self, x: np.ndarray) -> np.ndarray:
        y = self.lift_array(np.asarray(x, dtype=float))
        return np.mod(y, 1.0) if self.mod1 else y

    # -- set maps ---------------------------------------------------------------
    def preimage(self, S: IntervalSet) -> IntervalSet:
        """Exact ``f^{-1}(S)``; raises :class:`NotExactError` for polynomial branches."""
        if not self.is_exact:
            raise NotExactError("preimage needs affine branches (exact mode)")
        if S.is_empty():
            return S
        ivs = S.intervals
        starts = [lo for lo, _ in ivs]
        out: list[tuple[Fraction, Fraction]] = []
        for sb in self.sub_branches():
            rlo, rhi = sb.range
            j = max(bisect.bisect_right(starts, rlo) - 1, 0)
            chunk = []
            while j < len(ivs) and ivs[j][0] < rhi:
                lo, hi = ivs[j]
                if hi > rlo:
                    a, b = sb.inverse(max(lo, rlo)), sb.inverse(min(hi, rhi))
                    chunk.append((a, b) if a <= b else (b, a))
                j += 1
            if sb.slope < 0:
                chunk.reverse()
            out.extend(chunk)
        return IntervalSet.from_pairs(out, presorted=True)

    def _reduce(self, lo: Fraction, hi: Fraction) -> list[tuple[Fraction, Fraction]]:
        if not self.mod1:
            return [(lo, hi)]
        return [(a - m, b - m) for a, b, m in _split_at_integers(lo, hi)]

    def image_interval(self, lo: Fraction, hi: Fraction) -> list[tuple[Fraction, Fraction]]:
        """Image of ``[lo, hi]``; exact on affine and certified-monotone pieces."""
        out = []
        i = self.branch_index(lo)
        while i < len(self.branches) and self.branches[i].lo < hi:
            b = self.branches[i]
            a, c = max(lo, b.lo), min(hi, b.hi)
            if c > a:
                out.extend(self._branch_image(b, a, c))
            i += 1
        return out

    def _branch_image(self, b: Branch, a: Fraction, c: Fraction) -> list[tuple[Fraction, Fraction]]:
        if isinstance(b, AffineBranch) or b.inf_abs_deriv(a, c) > 0:
            ya, yc = b.lift(a), b.lift(c)
            return self._reduce(*((ya, yc) if ya <= yc else (yc, ya)))
        # enclosure mode: subdivide and pad with the Lipschitz constant
        out = []
        pieces = 32
        step = (c - a) / pieces
        for j in range(pieces):
            u, v = a + j * step, a + (j + 1) * step
            lip = b.sup_abs_deriv(u, v)
            yu = b.lift(u)
            out.extend(self._reduce(yu - lip * step, yu + lip * step))
        return out

    def image(self, S: IntervalSet) -> IntervalSet:
        out = []
        for lo, hi in S.intervals:
            out.extend(self.image_interval(lo, hi))
        return IntervalSet.from_pairs(out)

    # -- serialisation -------------------------------------------------------------
    def to_json(self) -> dict:
        if self.is_exact:
            kind = "piecewise_affine_circle" if self.mod1 else "piecewise_affine_interval"
        else:
            kind = "piecewise_polynomial_circle" if self.mod1 else "piecewise_polynomial_interval"
        return {"type": kind, "name": self.name, "mod1": self.mod1, "branches": [b.to_json() for b in self.branches]}

    def __repr__(self) -> str:
        return f"CircleMap({self.name!r}, {len(self.branches)} branches, mod1={self.mod1})"


# ---------------------------------------------------------------------------
# patches
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearizationPatch:
    """Blend of ``f`` with its tangent map at ``center`` on ``[center - radius, center + radius]``.

    ``f~(x) = f(x) + rho((x - p)/r) * (f(p) + f'(p)(x - p) - f(x))`` computed on lifts.
    """

    center: Fraction
    radius: Fraction
    bump: Bump
    value: Fraction  # lift of f at the centre
    slope: Fraction  # f'(centre)
    second_bound: Fraction  # certified sup |f''| used for the C¹ bound

    kind = "linearization"

    @property
    def lo(self) -> Fraction:
        return self.center - self.radius

    @property
    def hi(self) -> Fraction:
        return self.center + self.radius

    @property
    def inner(self) -> tuple[Fraction, Fraction]:
        w = (1 - self.bump.delta) * self.radius
        return (self.center - w, self.center + w)

    def lift(self, x: Fraction, base) -> Fraction:
        fx = base.lift(x)
        tangent = self.value + self.slope * (x - self.center)
        return fx + self.bump.value((x - self.center) / self.radius) * (tangent - fx)

    def deriv(self, x: Fraction, base) -> Fraction:
        s = (x - self.center) / self.radius
        fx, dfx = base.lift(x), base.derivative(x)
        tangent = self.value + self.slope * (x - self.center)
        return dfx + self.bump.deriv(s) / self.radius * (tangent - fx) + self.bump.value(s) * (self.slope - dfx)

    def c1_bound(self) -> Fraction:
        """``M2 (r^2/2 + r (1 + sup|rho'|/2))`` bounds ``|f~ - f| + |f~' - f'|``."""
        r = self.radius
        return self.second_bound * (r * r / 2 + r * (1 + self.bump.sup_deriv / 2))

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "center": scalar_str(self.center),
            "radius": scalar_str(self.radius),
            "delta": scalar_str(self.bump.delta),
            "value": scalar_str(self.value),
            "slope": scalar_str(self.slope),
            "second_bound": scalar_str(self.second_bound),
        }


@dataclass(frozen=True)
class CompressorPatch:
    """``g = f o h`` on ``[center - width, center + width]`` with the one-dimensional compressor

    ``h(x) = y + [1 - (1 - kappa) rho((x - y)/width)] (x - y)``.

    ``h`` is the identity near the support boundary and multiplies distances to
    ``y`` by ``kappa`` on the inner zone ``|x - y| <= (1 - delta) width``.
    """

    center: Fraction
    width: Fraction
    kappa: Fraction
    bump: Bump
    base_slope_bound: Fraction  # sup |f'| on the support

    kind = "compressor"

    @property
    def lo(self) -> Fraction:
        return self.center - self.width

    @property
    def hi(self) -> Fraction:
        return self.center + self.width

    def h(self, x: Fraction) -> Fraction:
        t = x - self.center
        return self.center + (1 - (1 - self.kappa) * self.bump.value(t / self.width)) * t

    def dh(self, x: Fraction) -> Fraction:
        s = (x - self.center) / self.width
        return 1 - (1 - self.kappa) * (self.bump.value(s) + self.bump.deriv(s) * s)

    def lift(self, x: Fraction, base) -> Fraction:
        return base.lift(self.h(x))

    def deriv(self, x: Fraction, base) -> Fraction:
        return base.derivative(self.h(x)) * self.dh(x)

    def h_c1_bound(self) -> Fraction:
        """Bound on ``|h - id| + |h' - 1|``: ``(1 - kappa)(width + 1 + sup|rho'|)``."""
        return (1 - self.kappa) * (self.width + 1 + self.bump.sup_deriv)

    def c1_bound(self) -> Fraction:
        return self.base_slope_bound * self.h_c1_bound()

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "center": scalar_str(self.center),
            "width": scalar_str(self.width),
            "kappa": scalar_str(self.kappa),
            "delta": scalar_str(self.bump.delta),
            "base_slope_bound": scalar_str(self.base_slope_bound),
        }


Patch = Union[LinearizationPatch, CompressorPatch]


class PatchedMap:
    """A base map modified on finitely many disjoint intervals by C¹ patches."""

    def __init__(self, base: "CircleMap | PatchedMap", patches: Iterable[Patch] = (), name: str | None = None):
        self.base = base
        self.patches: tuple[Patch, ...] = tuple(sorted(patches, key=lambda p: p.lo))
        self.mod1 = base.mod1
        self.name = name or f"patched({base.name})"
        for p in self.patches:
            if p.lo < 0 or p.hi > 1:
                raise ValueError("patch support leaves [0, 1]")
        for a, b in zip(self.patches, self.patches[1:]):
            if b.lo < a.hi:
                raise ValueError("patch supports overlap")
        self._los = [p.lo for p in self.patches]

    @property
    def is_exact(self) -> bool:
        return False

    @property
    def root(self) -> CircleMap:
        m = self
        while isinstance(m, PatchedMap):
            m = m.base
        return m

    def patch_at(self, x: Fraction) -> Patch | None:
        k = bisect.bisect_right(self._los, x) - 1
        if k >= 0 and self.patches[k].lo <= x <= self.patches[k].hi:
            return self.patches[k]
        return None

    def lift(self, x: ScalarLike) -> Fraction:
        x = as_scalar(x)
        p = self.patch_at(x)
        return p.lift(x, self.base) if p is not None else self.base.lift(x)

    def evaluate(self, x: ScalarLike) -> Fraction:
        y = self.lift(x)
        return y - math.floor(y) if self.mod1 else y

    __call__ = evaluate

    def derivative(self, x: ScalarLike) -> Fraction:
        x = as_scalar(x)
        p = self.patch_at(x)
        return p.deriv(x, self.base) if p is not None else self.base.derivative(x)

    def branch_index(self, x: Fraction) -> int:
        return self.root.branch_index(x)

    def local_sup_abs_deriv(self, lo: Fraction, hi: Fraction) -> Fraction:
        bound = self.base.local_sup_abs_deriv(lo, hi)
        return bound + max((p.c1_bound() for p in self.patches if p.lo < hi and p.hi > lo), default=ZERO)

    # -- float evaluation ---------------------------------------------------------
    def _float_tables(self):
        if not hasattr(self, "_ftab"):
            los = np.array([float(p.lo) for p in self.patches])
            his = np.array([float(p.hi) for p in self.patches])
            self._ftab = (los, his)
        return self._ftab

    def _patch_groups(self, x: np.ndarray):
        los, his = self._float_tables()
        if len(los) == 0:
            return np.full(x.shape, -1)
        idx = np.searchsorted(los, x, side="right") - 1
        inside = (idx >= 0) & (x <= his[np.clip(idx, 0, None)])
        return np.where(inside, idx, -1)

    def _arrays(self, kind):
        key = "_arr_" + kind
        if not hasattr(self, key):
            sel = [j for j, p in enumerate(self.patches) if p.kind == kind]
            if kind == "compressor":
                data = {
                    "center": np.array([float(self.patches[j].center) for j in sel]),
                    "width": np.array([float(self.patches[j].width) for j in sel]),
                    "kappa": np.array([float(self.patches[j].kappa) for j in sel]),
                    "delta": np.array([float(self.patches[j].bump.delta) for j in sel]),
                }
            else:
                data = {
                    "center": np.array([float(self.patches[j].center) for j in sel]),
                    "radius": np.array([float(self.patches[j].radius) for j in sel]),
                    "value": np.array([float(self.patches[j].value) for j in sel]),
                    "slope": np.array([float(self.patches[j].slope) for j in sel]),
                    "delta": np.array([float(self.patches[j].bump.delta) for j in sel]),
                }
            pos = np.full(len(self.patches), -1)
            pos[sel] = np.arange(len(sel))
            setattr(self, key, (data, pos))
        return getattr(self, key)

    @staticmethod
    def _rho(s, d):
        t = np.clip((1.0 - np.abs(s)) / d, 0.0, 1.0)
        return t * t * (3.0 - 2.0 * t)

    @staticmethod
    def _drho(s, d):
        t = np.clip((1.0 - np.abs(s)) / d, 0.0, 1.0)
        return -np.sign(s) * 6.0 * t * (1.0 - t) / d

    def lift_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = self._patch_groups(x)
        arg = x.copy()
        comp_data, comp_pos = self._arrays("compressor")
        lin_data, lin_pos = self._arrays("linearization")
        cm = g >= 0
        if cm.any() and len(comp_data["center"]):
            sel = cm & (comp_pos[np.clip(g, 0, None)] >= 0)
            j = comp_pos[g[sel]]
            y, w, k, d = (comp_data[n][j] for n in ("center", "width", "kappa", "delta"))
            t = x[sel] - y
            arg[sel] = y + (1.0 - (1.0 - k) * self._rho(t / w, d)) * t
        out = self.base.lift_array(arg)
        if cm.any() and len(lin_data["center"]):
            sel = cm & (lin_pos[np.clip(g, 0, None)] >= 0)
            j = lin_pos[g[sel]]
            p, r, v, a, d = (lin_data[n][j] for n in ("center", "radius", "value", "slope", "delta"))
            tangent = v + a * (x[sel] - p)
            out[sel] = out[sel] + self._rho((x[sel] - p) / r, d) * (tangent - out[sel])
        return out

    def deriv_array(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        g = self._patch_groups(x)
        arg = x.copy()
        factor = np.ones_like(x)
        comp_data, comp_pos = self._arrays("compressor")
        lin_data, lin_pos = self._arrays("linearization")
        cm = g >= 0
        if cm.any() and len(comp_data["center"]):
            sel = cm & (comp_pos[np.clip(g, 0, None)] >= 0)
            j = comp_pos[g[sel]]
            y, w, k, d = (comp_data[n][j] for n in ("center", "width", "kappa", "delta"))
            t = x[sel] - y
            s = t / w
            arg[sel] = y + (1.0 - (1.0 - k) * self._rho(s, d)) * t
            factor[sel] = 1.0 - (1.0 - k) * (self._rho(s, d) + self._drho(s, d) * s)
        out = self.base.deriv_array(arg) * factor
        if cm.any() and len(lin_data["center"]):
            sel = cm & (lin_pos[np.clip(g, 0, None)] >= 0)
            j = lin_pos[g[sel]]
            p, r, v, a, d = (lin_data[n][j] for n in ("center", "radius", "value", "slope", "delta"))
            s = (x[sel] - p) / r
            fx = self.base.lift_array(x[sel])
            tangent = v + a * (x[sel] - p)
            out[sel] = out[sel] + self._drho(s, d) / r * (tangent - fx) + self._rho(s, d) * (a - out[sel])
        return out

    def evaluate_array(self, x: np.ndarray) -> np.ndarray:
        y = self.lift_array(x)
        return np.mod(y, 1.0) if self.mod1 else y

    # -- set maps -------------------------------------------------------------------
    def preimage(self, S: IntervalSet) -> IntervalSet:
        if not self.patches:
            return self.base.preimage(S)
        raise NotExactError("patched maps have no closed-form preimage; use forward images")

    def _reduce(self, lo: Fraction, hi: Fraction) -> list[tuple[Fraction, Fraction]]:
        if not self.mod1:
            return [(lo, hi)]
        return [(a - m, b - m) for a, b, m in _split_at_integers(lo, hi)]

    def _patch_image(self, p: Patch, a: Fraction, c: Fraction) -> list[tuple[Fraction, Fraction]]:
        if isinstance(p, CompressorPatch):
            # h is increasing (h' >= kappa > 0): push the interval through h, then the base
            return self.base.image_interval(p.h(a), p.h(c))
        # linearisation patch: monotone when the C¹ defect is below the base's slope
        inf = self.root.branches[self.root.branch_index(p.center)].inf_abs_deriv(p.lo, p.hi)
        if inf > p.c1_bound():
            ya, yc = p.lift(a, self.base), p.lift(c, self.base)
            return self._reduce(*((ya, yc) if ya <= yc else (yc, ya)))
        out = []
        pieces = 32
        step = (c - a) / pieces
        lip = self.base.local_sup_abs_deriv(p.lo, p.hi) + p.c1_bound()
        for j in range(pieces):
            u = a + j * step
            yu = p.lift(u, self.base)
            out.extend(self._reduce(yu - lip * step, yu + lip * step))
        return out

    def image_interval(self, lo: Fraction, hi: Fraction) -> list[tuple[Fraction, Fraction]]:
        out = []
        cur = lo
        k = max(bisect.bisect_right(self._los, lo) - 1, 0)
        while cur < hi:
            while k < len(self.patches) and self.patches[k].hi <= cur:
                k += 1
            if k >= len(self.patches) or self.patches[k].lo >= hi:
                out.extend(self.base.image_interval(cur, hi))
                break
            p = self.patches[k]
            if p.lo > cur:
                out.extend(self.base.image_interval(cur, p.lo))
                cur = p.lo
            end = min(hi, p.hi)
            if end > cur:
                out.extend(self._patch_image(p, cur, end))
            cur = end
            k += 1
        return out

    def image(self, S: IntervalSet) -> IntervalSet:
        out = []
        for lo, hi in S.intervals:
            out.extend(self.image_interval(lo, hi))
        return IntervalSet.from_pairs(out)

    def to_json(self) -> dict:
        return {
            "type": "patched",
            "name": self.name,
            "base": self.base.to_json(),
            "patches": [p.to_json() for p in self.patches],
        }

    def __repr__(self) -> str:
        return f"PatchedMap({self.name!r}, {len(self.patches)} patches over {self.base!r})"


AnyMap = Union[CircleMap, PatchedMap]


# ---------------------------------------------------------------------------
# module-level operations
# ---------------------------------------------------------------------------


def evaluate(f: AnyMap, x: ScalarLike) -> Fraction:
    return f.evaluate(x)


def derivative(f: AnyMap, x: ScalarLike) -> Fraction:
    return f.derivative(x)


def preimage(f: AnyMap, S: IntervalSet) -> IntervalSet:
    return f.preimage(S)


def image(f: AnyMap, S: IntervalSet) -> IntervalSet:
    return f.image(S)


def iterate_image(f: AnyMap, S: IntervalSet, n: int) -> IntervalSet:
    for _ in range(n):
        S = f.image(S)
    return S


def iterate_preimage(f: AnyMap, S: IntervalSet, n: int) -> IntervalSet:
    for _ in range(n):
        S = f.preimage(S)
    return S


def _circle_dist(a: float, b: float, mod1: bool) -> float:
    d = abs(a - b)
    return min(d % 1.0, 1.0 - d % 1.0) if mod1 else d


def c1_distance_lower(f: AnyMap, g: AnyMap, grid_n: int = 4096) -> Fraction:
    """Max over a grid of ``dist(f(x), g(x)) + |f'(x) - g'(x)|`` (exact arithmetic on the grid).

    Grid points that are break points of either map are skipped for the
    derivative term.  Distances are measured on the circle when ``mod1``.
    """
    best = ZERO
    for j in range(grid_n):
        x = mpq(2 * j + 1, 2 * grid_n)
        fx, gx = f.evaluate(x), g.evaluate(x)
        d = abs(fx - gx)
        if f.mod1:
            d = min(d, 1 - d)
        try:
            d += abs(f.derivative(x) - g.derivative(x))
        except BreakPointError:
            pass
        best = max(best, d)
    return best


def _same_partition(f: CircleMap, g: CircleMap) -> bool:
    return [b.lo for b in f.branches] == [b.lo for b in g.branches]


def c1_distance_bound(f: AnyMap, g: AnyMap) -> Fraction:
    """Certified upper bound on the C¹ distance between ``f`` and ``g``.

    Supported configurations: ``f is g``; two affine maps on the same branch
    partition (exact sup of an affine difference); ``g`` a patched map whose
    chain of bases reaches ``f`` (triangle inequality over the patch levels,
    each level contributing its largest per-patch closed-form bound).
    """
    if f is g:
        return ZERO
    if isinstance(g, PatchedMap):
        own = max((p.c1_bound() for p in g.patches), default=ZERO)
        return c1_distance_bound(f, g.base) + own
    if isinstance(f, PatchedMap):
        return c1_distance_bound(g, f)
    if isinstance(f, CircleMap) and isinstance(g, CircleMap) and f.is_exact and g.is_exact and _same_partition(f, g):
        best = ZERO
        for bf, bg in zip(f.branches, g.branches):
            ds, do = bf.slope - bg.slope, bf.offset - bg.offset
            c0 = max(abs(ds * bf.lo + do), abs(ds * bf.hi + do))
            if f.mod1 and ds == 0:
                frac = c0 - math.floor(c0)
                c0 = min(frac, 1 - frac)
            best = max(best, c0 + abs(ds))
        return best
    if isinstance(f, CircleMap) and isinstance(g, CircleMap) and _same_partition(f, g):
        best = ZERO
        for bf, bg in zip(f.branches, g.branches):
            cf = bf.coeffs if isinstance(bf, PolyBranch) else (bf.offset, bf.slope)
            cg = bg.coeffs if isinstance(bg, PolyBranch) else (bg.offset, bg.slope)
            n = max(len(cf), len(cg))
            diff = [(cf[i] if i < len(cf) else ZERO) - (cg[i] if i < len(cg) else ZERO) for i in range(n)]
            best = max(best, poly_sup_abs(diff, bf.lo, bf.hi) + poly_sup_abs(_poly_deriv(diff), bf.lo, bf.hi))
        return best
    raise ValueError("no certified C¹ bound available for this pair of maps")


# ---------------------------------------------------------------------------
# periodic points
# ---------------------------------------------------------------------------


def find_periodic_points(f: CircleMap, period_max: int, cap: int = 2_000_000) -> list[Fraction]:
    """All points ``x`` with ``f^p(x) = x`` for some ``1 <= p <= period_max``.

    Itineraries through the affine sub-branches are enumerated; on each
    cylinder the composition is affine, so fixed points solve a linear
    equation.  A composition equal to the identity on a cylinder means a
    continuum of periodic points and is rejected.
    """
    if not f.is_exact:
        raise NotExactError("periodic points are computed for affine maps only")
    subs = f.sub_branches()
    found: set[Fraction] = set()
    # each state: (cylinder lo, cylinder hi, A, B) with f^p(x) = A x + B on the cylinder
    states = [(s.lo, s.hi, s.slope, s.offset) for s in subs]
    for p in range(1, period_max + 1):
        for lo, hi, A, B in states:
            if A == 1:
                if B == 0:
                    raise ValueError("a cylinder on which f^p is the identity: continuum of periodic points")
                continue
            x = B / (1 - A)
            if lo <= x < hi:
                found.add(x)
        if p == period_max:
            break
        nxt = []
        for lo, hi, A, B in states:
            # image of the cylinder under f^p is [A lo + B, A hi + B] (ordered); refine by the next sub-branch
            for s in subs:
                ylo, yhi = sorted((A * lo + B, A * hi + B))
                a, c = max(ylo, s.lo), min(yhi, s.hi)
                if c <= a:
                    continue
                xa, xc = sorted(((a - B) / A, (c - B) / A))
                nxt.append((xa, xc, s.slope * A, s.slope * B + s.offset))
        if len(nxt) > cap:
            raise MemoryError("itinerary count exceeds cap")
        states = nxt
    return sorted(found)


# ---------------------------------------------------------------------------
# named maps and JSON
# ---------------------------------------------------------------------------


def affine_circle_map(branches: Iterable[tuple[ScalarLike, ScalarLike, ScalarLike, ScalarLike]], mod1: bool = True,
                      name: str = "affine") -> CircleMap:
    return CircleMap([AffineBranch(*b) for b in branches], mod1=mod1, name=name)


def doubling() -> CircleMap:
    return affine_circle_map([(0, mpq(1, 2), 2, 0), (mpq(1, 2), 1, 2, 0)], name="doubling")


def multiplication(m: int) -> CircleMap:
    """``x -> m x mod 1`` with one branch per sheet."""
    return affine_circle_map([(mpq(j, m), mpq(j + 1, m), m, 0) for j in range(m)], name=f"times{m}")


def tripling() -> CircleMap:
    return multiplication(3)


def identity() -> CircleMap:
    return affine_circle_map([(0, 1, 1, 0)], name="identity")


def rotation(alpha: ScalarLike) -> CircleMap:
    a = as_scalar(alpha)
    return affine_circle_map([(0, 1, 1, a)], name=f"rotation({scalar_str(a)})")


def shifted_doubling(c: ScalarLike) -> CircleMap:
    c = as_scalar(c)
    return affine_circle_map([(0, mpq(1, 2), 2, c), (mpq(1, 2), 1, 2, c)], name=f"doubling+{scalar_str(c)}")


def half_contraction() -> CircleMap:
    """``x -> x/2`` on the interval ``[0, 1]`` (not a circle map)."""
    return affine_circle_map([(0, 1, mpq(1, 2), 0)], mod1=False, name="half")


def surrogate(c: ScalarLike = "1/5") -> CircleMap:
    """Expanding polynomial circle map ``x -> 2x + c x(1-x)(1-2x) mod 1``.

    A polynomial stand-in for a smooth perturbation of doubling: it fixes 0,
    has matching derivative ``2 + c`` at both ends (so it is C¹ on the
    circle), ``f' >= 2 - c/2`` and ``|f''| <= 6c``.
    """
    c = as_scalar(c)
    coeffs = (ZERO, 2 + c, -3 * c, 2 * c)
    return CircleMap([PolyBranch(ZERO, ONE, coeffs)], name=f"surrogate({scalar_str(c)})")


def map_from_json(obj: dict) -> AnyMap:
    kind = obj.get("type")
    if kind == "patched":
        base = map_from_json(obj["base"])
        patches = []
        for p in obj.get("patches", []):
            bump = Bump(as_scalar(p["delta"]))
            if p["kind"] == "compressor":
                patches.append(CompressorPatch(as_scalar(p["center"]), as_scalar(p["width"]), as_scalar(p["kappa"]),
                                               bump, as_scalar(p["base_slope_bound"])))
            elif p["kind"] == "linearization":
                patches.append(LinearizationPatch(as_scalar(p["center"]), as_scalar(p["radius"]), bump,
                                                  as_scalar(p["value"]), as_scalar(p["slope"]),
                                                  as_scalar(p["second_bound"])))
            else:
                raise ValueError(f"unknown patch kind {p['kind']!r}")
        return PatchedMap(base, patches, name=obj.get("name"))
    if kind not in {"piecewise_affine_circle", "piecewise_affine_interval", "piecewise_polynomial_circle",
                    "piecewise_polynomial_interval"}:
        raise ValueError(f"unknown map type {kind!r}")
    mod1 = obj.get("mod1", kind.endswith("circle"))
    branches: list[Branch] = []
    for b in obj.get("branches", []):
        lo, hi = b["dom"]
        if "coeffs" in b:
            branches.append(PolyBranch(as_scalar(lo), as_scalar(hi), tuple(as_scalar(c) for c in b["coeffs"])))
        else:
            branches.append(AffineBranch(lo, hi, b["slope"], b.get("offset", "0")))
    if not branches:
        raise ValueError("map spec has no branches")
    return CircleMap(branches, mod1=mod1, name=obj.get("name", "map"))


NAMED_MAPS = {
    "doubling": doubling,
    "tripling": tripling,
    "identity": identity,
    "half": half_contraction,
    "surrogate": surrogate,
}
