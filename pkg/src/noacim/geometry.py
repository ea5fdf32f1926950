"""Exact set algebra for finite unions of closed boxes with rational endpoints.

Two representations share one interface:

* :class:`IntervalSet` -- the one-dimensional workhorse.  Intervals are kept
  sorted, pairwise disjoint and with touching neighbours merged, so equality of
  point sets is equality of representations.
* :class:`BoxSet` -- axis-aligned boxes in ``[0, 1]^d`` for ``d >= 2``, kept
  pairwise interior-disjoint by box splitting.

Every set is closed.  Pieces of zero measure (degenerate intervals, flat boxes)
are discarded during canonicalisation, which makes "interiors are disjoint"
equivalent to "the intersection is empty".  Set difference therefore returns
the closure of the true difference; the two differ by a null set only.
"""

from __future__ import annotations

import bisect
from fractions import Fraction
from numbers import Rational
from typing import Iterable, Iterator, Sequence, Union

from gmpy2 import mpq

# Exact rationals.  ``gmpy2.mpq`` is a drop-in rational type (it compares and
# hashes equal to the corresponding ``Fraction``) and is several times faster,
# which matters for sets with 10^5+ components.
Scalar = mpq
ScalarLike = Union[Fraction, int, str, float, "mpq"]
Interval = tuple[Scalar, Scalar]
Box = tuple[Interval, ...]

ZERO = mpq(0)
ONE = mpq(1)
_MPQ = type(ZERO)


class DimensionError(ValueError):
    """Raised when two sets of different dimension are combined."""


def as_scalar(x: ScalarLike) -> Scalar:
    """Convert ``x`` to an exact rational.

    Strings may be ``"p/q"``, integers or finite decimals.  Floats are converted
    exactly (binary expansion), never rounded.
    """
    if type(x) is _MPQ:
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not scalars")
    if isinstance(x, Fraction):
        return mpq(x.numerator, x.denominator)
    if isinstance(x, (int, Rational)):
        return mpq(x)
    if isinstance(x, str):
        q = Fraction(x.strip())
        return mpq(q.numerator, q.denominator)
    if isinstance(x, float):
        q = Fraction(x)
        return mpq(q.numerator, q.denominator)
    raise TypeError(f"cannot interpret {x!r} as an exact rational")


def to_fraction(x: ScalarLike) -> Fraction:
    """Standard-library view of an exact scalar."""
    q = as_scalar(x)
    return Fraction(int(q.numerator), int(q.denominator))


def scalar_str(x: Fraction) -> str:
    """Render ``x`` as ``"p/q"`` (or ``"p"`` for integers)."""
    x = as_scalar(x)
    if x.denominator == 1:
        return str(x.numerator)
    return f"{x.numerator}/{x.denominator}"


def scalar_json(x: Fraction) -> dict:
    """Exact string plus a decimal rendering, for reports."""
    return {"exact": scalar_str(x), "decimal": float(x)}


# ---------------------------------------------------------------------------
# one dimension
# ---------------------------------------------------------------------------


def _canonical(pairs: Iterable[tuple[Fraction, Fraction]], presorted: bool = False) -> list[Interval]:
    items = [(lo, hi) for lo, hi in pairs if hi > lo]
    if not presorted:
        items.sort()
    out: list[Interval] = []
    for lo, hi in items:
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


class IntervalSet:
    """A canonical finite union of closed intervals ``[lo, hi]`` with ``lo < hi``."""

    __slots__ = ("_iv", "_measure")
    dim = 1

    def __init__(self, intervals: Iterable[Sequence[ScalarLike]] = ()):
        pairs = []
        for item in intervals:
            lo, hi = item
            lo, hi = as_scalar(lo), as_scalar(hi)
            if hi < lo:
                raise ValueError(f"interval with lo > hi: [{lo}, {hi}]")
            pairs.append((lo, hi))
        self._iv: tuple[Interval, ...] = tuple(_canonical(pairs))
        self._measure: Fraction | None = None

    @classmethod
    def _raw(cls, canonical: Sequence[Interval]) -> "IntervalSet":
        obj = cls.__new__(cls)
        obj._iv = tuple(canonical)
        obj._measure = None
        return obj

    @classmethod
    def from_pairs(cls, pairs: Iterable[Interval], presorted: bool = False) -> "IntervalSet":
        """Build from pairs that are already :class:`Fraction` (fast path)."""
        return cls._raw(_canonical(pairs, presorted=presorted))

    @classmethod
    def empty(cls) -> "IntervalSet":
        return cls._raw(())

    @classmethod
    def unit(cls) -> "IntervalSet":
        return cls._raw(((ZERO, ONE),))

    # -- basic protocol -----------------------------------------------------
    @property
    def intervals(self) -> tuple[Interval, ...]:
        return self._iv

    @property
    def boxes(self) -> tuple[Box, ...]:
        return tuple((iv,) for iv in self._iv)

    def __len__(self) -> int:
        return len(self._iv)

    def __iter__(self) -> Iterator[Interval]:
        return iter(self._iv)

    def __bool__(self) -> bool:
        return bool(self._iv)

    def is_empty(self) -> bool:
        return not self._iv

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self._iv == other._iv

    def __hash__(self) -> int:
        return hash(self._iv)

    def __repr__(self) -> str:
        shown = ", ".join(f"[{scalar_str(a)}, {scalar_str(b)}]" for a, b in self._iv[:6])
        more = f", ... ({len(self._iv)} pieces)" if len(self._iv) > 6 else ""
        return f"IntervalSet({shown}{more})"

    def measure(self) -> Fraction:
        if self._measure is None:
            self._measure = sum((hi - lo for lo, hi in self._iv), ZERO)
        return self._measure

    def lower(self) -> Fraction:
        return self._iv[0][0]

    def upper(self) -> Fraction:
        return self._iv[-1][1]

    # -- algebra -------------------------------------------------------------
    def _check(self, other: object) -> "IntervalSet":
        if not isinstance(other, IntervalSet):
            dim = getattr(other, "dim", None)
            raise DimensionError(f"cannot combine dimension 1 with dimension {dim}")
        return other

    def union(self, other: "IntervalSet") -> "IntervalSet":
        other = self._check(other)
        if not other._iv:
            return self
        if not self._iv:
            return other
        merged = sorted(self._iv + other._iv)
        return IntervalSet._raw(_canonical(merged, presorted=True))

    def intersect(self, other: "IntervalSet") -> "IntervalSet":
        other = self._check(other)
        a, b = self._iv, other._iv
        i = j = 0
        out: list[Interval] = []
        while i < len(a) and j < len(b):
            lo = a[i][0] if a[i][0] > b[j][0] else b[j][0]
            hi = a[i][1] if a[i][1] < b[j][1] else b[j][1]
            if hi > lo:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalSet._raw(out)

    def subtract(self, other: "IntervalSet") -> "IntervalSet":
        """Closure of ``self \\ other``."""
        other = self._check(other)
        b = other._iv
        if not b or not self._iv:
            return self
        out: list[Interval] = []
        j = 0
        for lo, hi in self._iv:
            while j < len(b) and b[j][1] <= lo:
                j += 1
            cur = lo
            k = j
            while k < len(b) and b[k][0] < hi:
                if b[k][0] > cur:
                    out.append((cur, b[k][0]))
                if b[k][1] > cur:
                    cur = b[k][1]
                if cur >= hi:
                    break
                k += 1
            if cur < hi:
                out.append((cur, hi))
        return IntervalSet._raw(out)

    __or__ = union
    __and__ = intersect
    __sub__ = subtract

    def complement_in_unit(self) -> "IntervalSet":
        if self._iv and (self._iv[0][0] < 0 or self._iv[-1][1] > 1):
            raise ValueError("set is not contained in [0, 1]")
        return IntervalSet.unit().subtract(self)

    def is_subset(self, other: "IntervalSet") -> bool:
        """Exact inclusion of point sets (both closed and canonical)."""
        other = self._check(other)
        b = other._iv
        starts = [lo for lo, _ in b]
        for lo, hi in self._iv:
            k = bisect.bisect_right(starts, lo) - 1
            if k < 0 or b[k][1] < hi:
                return False
        return True

    def contains_point(self, x: ScalarLike) -> bool:
        x = as_scalar(x)
        k = bisect.bisect_right(self._iv, (x, float("inf"))) - 1
        return k >= 0 and self._iv[k][0] <= x <= self._iv[k][1]

    def interiors_disjoint(self, other: "IntervalSet") -> bool:
        return self.intersect(other).is_empty()

    def closures_disjoint(self, other: "IntervalSet", circle: bool = False) -> bool:
        """True when the closed sets share no point (strict gaps).

        With ``circle=True`` the endpoints 0 and 1 are identified.
        """
        other = self._check(other)
        a, b = self._iv, other._iv
        i = j = 0
        while i < len(a) and j < len(b):
            if a[i][1] >= b[j][0] and b[j][1] >= a[i][0]:
                return False
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        if circle and a and b:
            if (a[0][0] == 0 and b[-1][1] == 1) or (b[0][0] == 0 and a[-1][1] == 1):
                return False
        return True

    def affine_image(self, slope: Fraction, offset: Fraction) -> "IntervalSet":
        """Image under ``x -> slope*x + offset`` (no reduction mod 1)."""
        if slope == 0:
            raise ValueError("degenerate affine map")
        pts = [(slope * lo + offset, slope * hi + offset) for lo, hi in self._iv]
        if slope < 0:
            pts = [(b, a) for a, b in reversed(pts)]
        return IntervalSet._raw(_canonical(pts, presorted=True))

    def components(self) -> list["IntervalSet"]:
        return [IntervalSet._raw((iv,)) for iv in self._iv]

    def shrink(self, s: Fraction) -> "IntervalSet":
        """Remove ``s`` from both ends of every component (drops short ones)."""
        return IntervalSet._raw([(lo + s, hi - s) for lo, hi in self._iv if hi - lo > 2 * s])

    # -- serialisation -------------------------------------------------------
    def to_json(self) -> dict:
        return {"dim": 1, "boxes": [[[scalar_str(lo), scalar_str(hi)]] for lo, hi in self._iv]}


# ---------------------------------------------------------------------------
# d >= 2
# ---------------------------------------------------------------------------


def _box_measure(box: Box) -> Fraction:
    out = ONE
    for lo, hi in box:
        out *= hi - lo
    return out


def _box_intersect(a: Box, b: Box) -> Box | None:
    out = []
    for (alo, ahi), (blo, bhi) in zip(a, b):
        lo = alo if alo > blo else blo
        hi = ahi if ahi < bhi else bhi
        if hi <= lo:
            return None
        out.append((lo, hi))
    return tuple(out)


def _box_subtract(a: Box, b: Box) -> list[Box]:
    """Closure of ``a \\ b`` as interior-disjoint boxes."""
    cut = _box_intersect(a, b)
    if cut is None:
        return [a]
    pieces: list[Box] = []
    rest = list(a)
    for axis, (clo, chi) in enumerate(cut):
        lo, hi = rest[axis]
        if clo > lo:
            piece = list(rest)
            piece[axis] = (lo, clo)
            pieces.append(tuple(piece))
        if chi < hi:
            piece = list(rest)
            piece[axis] = (chi, hi)
            pieces.append(tuple(piece))
        rest[axis] = (clo, chi)
    return pieces


class BoxSet:
    """Finite union of pairwise interior-disjoint closed boxes in dimension ``d >= 2``."""

    __slots__ = ("dim", "_boxes")

    def __init__(self, dim: int, boxes: Iterable[Sequence[Sequence[ScalarLike]]] = ()):
        if dim < 1:
            raise ValueError("dimension must be positive")
        self.dim = dim
        acc: list[Box] = []
        for raw in boxes:
            box = tuple((as_scalar(lo), as_scalar(hi)) for lo, hi in raw)
            if len(box) != dim:
                raise DimensionError(f"box of dimension {len(box)} in a {dim}-dimensional set")
            if any(hi < lo for lo, hi in box):
                raise ValueError("box with lo > hi")
            if any(hi == lo for lo, hi in box):
                continue
            pieces = [box]
            for existing in acc:
                pieces = [p for q in pieces for p in _box_subtract(q, existing)]
                if not pieces:
                    break
            acc.extend(pieces)
        self._boxes: tuple[Box, ...] = tuple(acc)

    @classmethod
    def _raw(cls, dim: int, boxes: Iterable[Box]) -> "BoxSet":
        obj = cls.__new__(cls)
        obj.dim = dim
        obj._boxes = tuple(boxes)
        return obj

    @classmethod
    def unit(cls, dim: int) -> "BoxSet":
        return cls._raw(dim, [tuple((ZERO, ONE) for _ in range(dim))])

    @property
    def boxes(self) -> tuple[Box, ...]:
        return self._boxes

    def __len__(self) -> int:
        return len(self._boxes)

    def __iter__(self) -> Iterator[Box]:
        return iter(self._boxes)

    def is_empty(self) -> bool:
        return not self._boxes

    def __repr__(self) -> str:
        return f"BoxSet(dim={self.dim}, {len(self._boxes)} boxes, measure={self.measure()})"

    def measure(self) -> Fraction:
        return sum((_box_measure(b) for b in self._boxes), ZERO)

    def _check(self, other: "BoxSet") -> "BoxSet":
        if getattr(other, "dim", None) != self.dim or not isinstance(other, BoxSet):
            raise DimensionError(f"cannot combine dimension {self.dim} with {getattr(other, 'dim', None)}")
        return other

    def union(self, other: "BoxSet") -> "BoxSet":
        other = self._check(other)
        extra = other.subtract(self)
        return BoxSet._raw(self.dim, self._boxes + extra._boxes)

    def intersect(self, other: "BoxSet") -> "BoxSet":
        other = self._check(other)
        out = []
        for a in self._boxes:
            for b in other._boxes:
                c = _box_intersect(a, b)
                if c is not None:
                    out.append(c)
        return BoxSet._raw(self.dim, out)

    def subtract(self, other: "BoxSet") -> "BoxSet":
        other = self._check(other)
        out: list[Box] = []
        for a in self._boxes:
            pieces = [a]
            for b in other._boxes:
                pieces = [p for q in pieces for p in _box_subtract(q, b)]
                if not pieces:
                    break
            out.extend(pieces)
        return BoxSet._raw(self.dim, out)

    __or__ = union
    __and__ = intersect
    __sub__ = subtract

    def complement_in_unit(self) -> "BoxSet":
        for box in self._boxes:
            if any(lo < 0 or hi > 1 for lo, hi in box):
                raise ValueError("set is not contained in the unit box")
        return BoxSet.unit(self.dim).subtract(self)

    def interiors_disjoint(self, other: "BoxSet") -> bool:
        return self.intersect(other).is_empty()

    def contains_point(self, x: Sequence[ScalarLike]) -> bool:
        pt = [as_scalar(v) for v in x]
        return any(all(lo <= v <= hi for v, (lo, hi) in zip(pt, box)) for box in self._boxes)

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "boxes": [[[scalar_str(lo), scalar_str(hi)] for lo, hi in box] for box in self._boxes],
        }


AnySet = Union[IntervalSet, BoxSet]


def make_set(dim: int, boxes: Iterable[Sequence[Sequence[ScalarLike]]] = ()) -> AnySet:
    """Dimension-dispatching constructor (``IntervalSet`` when ``dim == 1``)."""
    if dim == 1:
        return IntervalSet(box[0] if len(box) == 1 and isinstance(box[0], (list, tuple)) else box for box in boxes)
    return BoxSet(dim, boxes)


def set_from_json(obj: dict) -> AnySet:
    dim = int(obj["dim"])
    boxes = obj.get("boxes", [])
    if dim == 1:
        return IntervalSet(box[0] for box in boxes)
    return BoxSet(dim, boxes)


def union(a: AnySet, b: AnySet) -> AnySet:
    return a.union(b)


def intersect(a: AnySet, b: AnySet) -> AnySet:
    return a.intersect(b)


def subtract(a: AnySet, b: AnySet) -> AnySet:
    return a.subtract(b)


def measure(a: AnySet) -> Fraction:
    return a.measure()


def complement_in_unit(a: AnySet) -> AnySet:
    return a.complement_in_unit()
