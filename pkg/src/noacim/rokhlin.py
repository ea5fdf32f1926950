"""Rokhlin towers for non-invariant measures, built over exact interval sets.

The construction follows the classical argument for aperiodic non-singular
maps:

1. cover the circle by small ``N``-good intervals ``A_k`` (avoiding periodic
   points of period ``< N``) and pull them back, ``B_k = f^{-N}(A_k)``;
2. merge the ``B_k`` one at a time with the hat-subtraction formula
   ``C = (A \\ B^) u (B \\ (A \\ B^)^)`` until the hat of the merged set
   covers almost everything (the set ``W``);
3. push ``W`` forward to the image ``V = f^i(W)`` of smallest measure;
4. split the hat of ``V`` by first hitting time, ``V_i* = f^{-i}V \\ (V u ... u f^{-(i-1)}V)``,
   and collect the hitting times ``i >= n0`` in one residue class ``j0`` mod
   ``n0`` into the base ``U``.

Every infinite union ("hat") is truncated at a finite depth ``T``; all
inequalities are then checked exactly on the truncated sets, so a reported
PASS is a theorem about the returned sets, independent of the truncation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .geometry import ONE, ZERO, IntervalSet, as_scalar, mpq, scalar_json, scalar_str
from .maps import AnyMap, CircleMap, find_periodic_points


class ResourceCapError(RuntimeError):
    """An interval set exceeded the configured component cap."""


class ConstructionError(RuntimeError):
    """A construction step could not reach its target with the given budget."""


DEFAULT_CAP = 10**6


def _capped(S: IntervalSet, cap: int, what: str) -> IntervalSet:
    if len(S) > cap:
        raise ResourceCapError(f"{what}: {len(S)} components exceeds cap {cap}")
    return S


# ---------------------------------------------------------------------------
# good sets and hats
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoodSet:
    """A set ``Z`` whose preimages ``f^{-i}Z``, ``1 <= i < N``, meet ``Z`` in a null set only."""

    Z: IntervalSet
    N: int
    certificate: tuple[tuple[int, Fraction], ...]  # (i, m(f^{-i}Z)) for each verified i

    def measure(self) -> Fraction:
        return self.Z.measure()


@dataclass(frozen=True)
class Refutation:
    """Witness that a set is not ``N``-good: ``Z`` and ``f^{-i}Z`` overlap on ``witness``."""

    i: int
    witness: tuple[Fraction, Fraction]
    overlap: Fraction

    def __bool__(self) -> bool:  # a refutation is falsy so ``if is_n_good(...)`` reads naturally
        return False


def is_n_good(f: AnyMap, Z: IntervalSet, N: int, cap: int = DEFAULT_CAP) -> GoodSet | Refutation:
    cert = []
    P = Z
    for i in range(1, N):
        P = _capped(f.preimage(P), cap, "is_n_good")
        overlap = P.intersect(Z)
        if not overlap.is_empty():
            return Refutation(i, overlap.intervals[0], overlap.measure())
        cert.append((i, P.measure()))
    return GoodSet(Z, N, tuple(cert))


@dataclass(frozen=True)
class HatSet:
    """``value = Z u f^{-1}Z u ... u f^{-T}Z`` with a certified bound on what is missing."""

    base: IntervalSet
    depth: int
    value: IntervalSet
    tail_bound: Fraction


def hat(f: AnyMap, Z: IntervalSet, T: int, cap: int = DEFAULT_CAP, sigma: Fraction | None = None) -> HatSet:
    """Truncated hat via ``H_t = Z u f^{-1}(H_{t-1})``.

    The tail bound is ``1 - m(H_T)`` (the complement of the truncated hat),
    improved to the geometric series ``sum_{i>T} sigma^i m(Z)`` when the
    non-singularity constant ``sigma`` of the map is below one.
    """
    H = Z
    for _ in range(T):
        H = _capped(Z.union(f.preimage(H)), cap, "hat")
    tail = ONE - H.measure()
    if sigma is not None and sigma < 1:
        tail = min(tail, Z.measure() * sigma ** (T + 1) / (1 - sigma))
    return HatSet(Z, T, H, tail)


# ---------------------------------------------------------------------------
# merging, covering, W and V
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MergeResult:
    C: GoodSet
    internal_depth: int
    containment_depth: int  # depth at which hat(C) contains A u B exactly
    missing: Fraction  # m((A u B) \ hat_{check}(C)) at the requested check depth
    check_depth: int


def merge_good(f: AnyMap, A: GoodSet, B: GoodSet, T: int, check_depth: int | None = None,
               cap: int = DEFAULT_CAP) -> MergeResult:
    """Merge two ``N``-good sets by ``C = A' u (B \\ hat(A'))`` with ``A' = A \\ hat(B)``.

    With hats truncated at depth ``T >= N - 1`` the result is exactly
    ``N``-good, and ``A u B`` lies in the depth-``2T`` hat of ``C``.
    """
    if A.N != B.N:
        raise ValueError("merge needs sets that are good for the same N")
    N = A.N
    if T < N - 1:
        raise ValueError(f"internal hat depth {T} must be at least N - 1 = {N - 1}")
    A1 = A.Z.subtract(hat(f, B.Z, T, cap).value)
    B1 = B.Z.subtract(hat(f, A1, T, cap).value)
    C = A1.union(B1)
    good = is_n_good(f, C, N, cap)
    if not good:
        raise ConstructionError(f"merged set failed the {N}-good check at i={good.i}")
    check = 2 * T if check_depth is None else check_depth
    S = A.Z.union(B.Z)
    if getattr(f, "is_exact", False) and isinstance(f, CircleMap):
        missing = missing_from_hat(f, C, S, check, cap)
    else:
        missing = S.subtract(hat(f, C, check, cap).value).measure()
    return MergeResult(good, T, 2 * T, missing, check)


def missing_from_hat(f: CircleMap, Z: IntervalSet, S: IntervalSet, depth: int, cap: int = DEFAULT_CAP) -> Fraction:
    """``m(S \\ hat_depth(Z))`` for an affine circle map, by pushing ``S`` forward.

    Only the points of ``S`` that have not yet entered ``Z`` are tracked, as
    pieces ``[lo, hi]`` carrying the affine map ``y = a x + b`` to their current
    position; the hat itself (whose complement may have a huge number of
    components) is never formed.
    """
    subs = f.sub_branches()
    pieces = [(lo, hi, ONE, ZERO) for lo, hi in S.intervals]
    for t in range(depth + 1):
        survivors = []
        for lo, hi, a, b in pieces:
            ya, yb = a * lo + b, a * hi + b
            J = IntervalSet.from_pairs([(min(ya, yb), max(ya, yb))]).subtract(Z)
            for jlo, jhi in J.intervals:
                xa, xb = (jlo - b) / a, (jhi - b) / a
                survivors.append((min(xa, xb), max(xa, xb), a, b))
        if t == depth:
            return sum((hi - lo for lo, hi, _, _ in survivors), ZERO)
        pieces = []
        for lo, hi, a, b in survivors:
            ya, yb = a * lo + b, a * hi + b
            ylo, yhi = min(ya, yb), max(ya, yb)
            for s in subs:
                clo, chi = max(ylo, s.lo), min(yhi, s.hi)
                if chi <= clo:
                    continue
                xa, xb = (clo - b) / a, (chi - b) / a
                pieces.append((min(xa, xb), max(xa, xb), s.slope * a, s.slope * b + s.offset))
        if len(pieces) > cap:
            raise ResourceCapError(f"hat containment: {len(pieces)} pieces exceeds cap {cap}")
    return ZERO


@dataclass(frozen=True)
class Cover:
    """Pieces ``B_k = f^{-N}(A_k)`` and the excluded neighbourhood of short periodic orbits."""

    N: int
    A: tuple[IntervalSet, ...]
    B: tuple[GoodSet, ...]
    periodic_points: tuple[Fraction, ...]
    excluded: IntervalSet
    covered: Fraction  # m(union B_k)


def cover_good_saturated(f: CircleMap, N: int, tol: Fraction, max_level: int = 16,
                         cap: int = DEFAULT_CAP, verify: bool = True) -> Cover:
    """Finite family of ``N``-good, ``N``-saturated sets covering all but ``tol`` of the circle.

    Dyadic intervals are refined adaptively: an interval is kept as soon as it
    is ``N``-good, split otherwise, and discarded at ``max_level`` or when it
    lies inside the excluded neighbourhood of the periodic points of period
    ``< N``.
    """
    tol = as_scalar(tol)
    if N < 1:
        raise ValueError("N must be positive")
    if not f.is_exact:
        raise ValueError("cover construction needs an affine (exact-mode) map")
    if not f.is_expanding():
        raise ValueError("cover construction needs an expanding map")
    if N == 1:
        whole = IntervalSet.unit()
        g = GoodSet(f.preimage(whole), 1, ())
        return Cover(1, (whole,), (g,), (), IntervalSet.empty(), g.measure())
    periodic = find_periodic_points(f, N - 1)
    radius = tol / (8 * max(1, len(periodic)))
    excluded = IntervalSet.from_pairs([(max(ZERO, p - radius), min(ONE, p + radius)) for p in periodic]
                                      + [(ONE - radius, ONE) for p in periodic if p == 0])
    kept: list[IntervalSet] = []
    stack = [(ZERO, ONE, 0)]
    while stack:
        lo, hi, level = stack.pop()
        piece = IntervalSet.from_pairs([(lo, hi)])
        if piece.is_subset(excluded):
            continue
        if piece.interiors_disjoint(excluded) and is_n_good(f, piece, N, cap):
            kept.append(piece)
            continue
        if level >= max_level:
            continue
        mid = (lo + hi) / 2
        stack.append((mid, hi, level + 1))
        stack.append((lo, mid, level + 1))
    kept.sort(key=lambda s: s.lower())
    B = []
    total = IntervalSet.empty()
    for a in kept:
        b = a
        for _ in range(N):
            b = f.preimage(b)
        if verify:
            g = is_n_good(f, b, N, cap)
            if not g:
                raise ConstructionError("pulled-back cover piece is not N-good")
        else:
            g = GoodSet(b, N, ())
        B.append(g)
        total = total.union(b)
    covered = total.measure()
    if covered <= 1 - tol:
        raise ConstructionError(f"cover reaches only {float(covered):.6f} <= 1 - tol at level {max_level}")
    return Cover(N, tuple(kept), tuple(B), tuple(periodic), excluded, covered)


def is_n_saturated(f: CircleMap, Z: IntervalSet, N: int) -> bool:
    """Exact check of ``f^{-N}(f^N(Z)) = Z``."""
    img = Z
    for _ in range(N):
        img = f.image(img)
    back = img
    for _ in range(N):
        back = f.preimage(back)
    return back == Z


@dataclass(frozen=True)
class WResult:
    W: GoodSet
    merges: int
    hat_measure: Fraction
    hat_depth: int
    target: Fraction
    reached: bool
    history: tuple[Fraction, ...]


def build_W(f: CircleMap, N: int, eps: Fraction, T: int, merge_depth: int | None = None,
            cover: Cover | None = None, cover_tol: Fraction | None = None, max_merges: int | None = None,
            cap: int = DEFAULT_CAP, strict: bool = True) -> WResult:
    """Merge cover pieces until the depth-``T`` hat of the merged set exceeds ``1 - eps``."""
    eps = as_scalar(eps)
    if cover is None:
        cover = cover_good_saturated(f, N, cover_tol if cover_tol is not None else eps / 2, cap=cap)
    depth = max(N - 1, 1) if merge_depth is None else merge_depth
    pieces = sorted(cover.B, key=lambda g: -g.measure())
    C = pieces[0]
    history = []
    merges = 0
    hm = hat(f, C.Z, T, cap).value.measure()
    history.append(hm)
    for piece in pieces[1:]:
        if hm > 1 - eps or (max_merges is not None and merges >= max_merges):
            break
        C = merge_good(f, C, piece, depth, check_depth=0, cap=cap).C
        merges += 1
        hm = hat(f, C.Z, T, cap).value.measure()
        history.append(hm)
    reached = hm > 1 - eps
    if strict and not reached:
        raise ConstructionError(f"hat measure {float(hm):.6f} did not exceed 1 - eps after {merges} merges")
    return WResult(C, merges, hm, T, 1 - eps, reached, tuple(history))


@dataclass(frozen=True)
class VResult:
    V: GoodSet
    shift: int  # V = f^shift(W)
    image_measures: tuple[Fraction, ...]
    hat_measure: Fraction
    W: WResult


def build_V(f: CircleMap, N: int, eps: Fraction, T: int, require_large_N: bool = True,
            w: WResult | None = None, cap: int = DEFAULT_CAP, **w_kwargs) -> VResult:
    """``V = f^i(W)`` for the least ``i < N`` with ``m(f^i W) <= 1/N`` (smallest image if none)."""
    eps = as_scalar(eps)
    if require_large_N and not N > 1 / eps:
        raise ValueError(f"need N > 1/eps (N={N}, 1/eps={1 / eps})")
    if w is None:
        w = build_W(f, N, eps, T, cap=cap, **w_kwargs)
    images = [w.W.Z]
    for _ in range(1, N):
        images.append(_capped(f.image(images[-1]), cap, "build_V"))
    measures = tuple(s.measure() for s in images)
    shift = next((i for i, m in enumerate(measures) if m <= mpq(1, N)), None)
    if shift is None:
        shift = min(range(N), key=lambda i: measures[i])
    V = images[shift]
    good = is_n_good(f, V, N, cap)
    if not good:
        raise ConstructionError(f"V = f^{shift}(W) is not {N}-good (overlap at i={good.i})")
    hm = hat(f, V, T, cap).value.measure()
    return VResult(good, shift, measures, hm, w)


# ---------------------------------------------------------------------------
# the tower
# ---------------------------------------------------------------------------


@dataclass
class TowerConfig:
    n0: int
    l: int = 1
    eps0: Fraction = Fraction(1, 10)
    T: int = 20
    N: int | None = None  # goodness order used for W and V (default n0)
    eps_hat: Fraction | None = None  # target 1 - m(hat_T W) (default eps0 / 2)
    cover_tol: Fraction | None = None
    merge_depth: int | None = None
    max_merges: int | None = None
    hat_depth: int | None = None  # depth of the stopping test for W (default min(T, 12))
    cap: int = DEFAULT_CAP
    adaptive_depth: bool = False  # truncate the hitting-time split at the cap instead of failing
    max_U_components: int | None = None  # keep only the longest components of U
    max_hit_components: int | None = None  # prune first-hit sets to their longest components

    def __post_init__(self):
        self.eps0 = as_scalar(self.eps0)
        if self.n0 < 1 or self.l < 1:
            raise ValueError("n0 and l must be positive")
        if self.l > self.n0:
            raise ValueError("l must not exceed n0")
        if not 0 < self.eps0 < 1:
            raise ValueError("eps0 must lie in (0, 1)")
        if self.T < self.n0:
            raise ValueError("truncation depth must be at least n0")


@dataclass
class Tower:
    U: IntervalSet
    n0: int
    l: int
    eps0: Fraction
    T: int
    levels: list[IntervalSet]
    level_measures: list[Fraction]
    S: list[Fraction]
    j0: int
    hit_measures: list[Fraction]  # m(V_i*) for 0 <= i <= T
    V: IntervalSet
    coverage: Fraction  # sum_{i<n0} m(f^{-i}U)
    low_mass: Fraction  # sum_{i<l} m(f^{-i}U)
    disjoint: bool
    open: bool = False
    strict_gaps: bool | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def coverage_ok(self) -> bool:
        return self.coverage > 1 - self.eps0

    @property
    def low_ok(self) -> bool:
        return self.low_mass < mpq(self.l, self.n0) + self.eps0

    @property
    def valid(self) -> bool:
        return self.disjoint and self.coverage_ok and self.low_ok and (not self.open or bool(self.strict_gaps))

    def ledger(self) -> list[str]:
        lines = [
            f"levels interior-disjoint: {'PASS' if self.disjoint else 'FAIL'}",
            f"sum_(i<{self.n0}) m(f^-i U) = {float(self.coverage):.6f} > 1 - eps0 = {float(1 - self.eps0):.6f}: "
            f"{'PASS' if self.coverage_ok else 'FAIL'}",
            f"sum_(i<{self.l}) m(f^-i U) = {float(self.low_mass):.6f} < l/n0 + eps0 = "
            f"{float(mpq(self.l, self.n0) + self.eps0):.6f}: {'PASS' if self.low_ok else 'FAIL'}",
        ]
        if self.open:
            lines.append(f"closures of levels pairwise disjoint: {'PASS' if self.strict_gaps else 'FAIL'}")
        return lines

    def to_json(self) -> dict:
        return {
            "n0": self.n0,
            "l": self.l,
            "eps0": scalar_json(self.eps0),
            "T": self.T,
            "j0": self.j0,
            "open": self.open,
            "U": self.U.to_json(),
            "U_components": len(self.U),
            "level_measures": [scalar_json(m) for m in self.level_measures],
            "level_components": [len(s) for s in self.levels],
            "S": [scalar_json(s) for s in self.S],
            "hit_measures": [scalar_json(m) for m in self.hit_measures],
            "coverage": scalar_json(self.coverage),
            "low_mass": scalar_json(self.low_mass),
            "checks": {
                "disjoint": self.disjoint,
                "coverage": self.coverage_ok,
                "low_mass": self.low_ok,
                "strict_gaps": self.strict_gaps,
            },
            "valid": self.valid,
            "ledger": self.ledger(),
            "diagnostics": self.diagnostics,
        }


def levels_of(f: AnyMap, U: IntervalSet, n0: int, cap: int = DEFAULT_CAP) -> list[IntervalSet]:
    levels = [U]
    for _ in range(1, n0):
        levels.append(_capped(f.preimage(levels[-1]), cap, "tower level"))
    return levels


def levels_pairwise_disjoint(levels: Sequence[IntervalSet], closures: bool = False, circle: bool = True) -> bool:
    for i in range(len(levels)):
        for j in range(i + 1, len(levels)):
            if closures:
                if not levels[i].closures_disjoint(levels[j], circle=circle):
                    return False
            elif not levels[i].interiors_disjoint(levels[j]):
                return False
    return True


def keep_largest(U: IntervalSet, count: int) -> IntervalSet:
    """The ``count`` longest components of ``U`` (ties broken by position)."""
    comps = sorted(U.intervals, key=lambda iv: (-(iv[1] - iv[0]), iv[0]))[:count]
    return IntervalSet.from_pairs(comps)


def hitting_sets(f: AnyMap, V: IntervalSet, T: int, cap: int = DEFAULT_CAP,
                 adaptive: bool = False, prune: int | None = None) -> list[IntervalSet]:
    """First-hit sets ``V_i* = f^{-1}(V_{i-1}*) \\ V`` for ``0 <= i <= T``.

    With ``prune`` every set is cut down to its ``prune`` longest components
    before the next preimage; the results are then subsets of the true
    first-hit sets, which is all the tower needs.  With ``adaptive=True`` the
    recursion stops quietly at the last depth whose set fits under ``cap``
    (the caller sees a shorter list); otherwise the cap raises
    :class:`ResourceCapError`.
    """
    out = [V]
    for _ in range(T):
        nxt = f.preimage(out[-1]).subtract(V)
        if prune is not None and len(nxt) > prune:
            nxt = keep_largest(nxt, prune)
        if len(nxt) > cap:
            if adaptive:
                break
            raise ResourceCapError(f"hitting set: {len(nxt)} components exceeds cap {cap}")
        out.append(nxt)
    return out


def residue_sums(hit_measures: Sequence[Fraction], n0: int, l: int) -> list[Fraction]:
    """``S_j = sum_{k=j}^{j+l-1} sum_{i = k mod n0} m(V_i*)``."""
    by_class = [ZERO] * n0
    for i, m in enumerate(hit_measures):
        by_class[i % n0] += m
    return [sum((by_class[k % n0] for k in range(j, j + l)), ZERO) for j in range(n0)]


def tower_from_V(f: AnyMap, V: IntervalSet, n0: int, l: int, eps0: Fraction, T: int,
                 cap: int = DEFAULT_CAP, diagnostics: dict | None = None, adaptive: bool = False,
                 max_components: int | None = None, prune: int | None = None) -> Tower:
    """Split the hat of ``V`` by hitting time and pick the residue class ``j0``.

    Among the residues allowed by the pigeonhole bound ``S_j <= l/n0`` the one
    giving the largest exact coverage is chosen (ties: smallest ``j``).
    ``max_components`` keeps only the longest components of ``U``; with
    ``adaptive`` the deepest hitting sets are dropped while the levels exceed
    ``cap``.  Both shrink ``U``, and every inequality is checked on the result.
    """
    eps0 = as_scalar(eps0)
    hits = hitting_sets(f, V, T, cap, adaptive=adaptive, prune=prune)
    T_eff = len(hits) - 1
    hm = [s.measure() for s in hits]
    S = residue_sums(hm, n0, l)
    bound = mpq(l, n0)
    candidates = [j for j in range(n0) if S[j] <= bound]
    if not candidates:  # impossible: the S_j sum to l * m(hat V) <= l
        raise ConstructionError("no residue class satisfies the pigeonhole bound")
    best = None
    dropped = {}
    for j in candidates:
        depths = [i for i in range(n0, T_eff + 1) if i % n0 == j]
        while True:
            U = IntervalSet.empty()
            for i in depths:
                U = U.union(hits[i])
            if max_components is not None and len(U) > max_components:
                U = keep_largest(U, max_components)
            try:
                levels = levels_of(f, U, n0, cap)
                break
            except ResourceCapError:
                if not adaptive or not depths:
                    raise
                dropped[j] = dropped.get(j, 0) + 1
                depths.pop()  # give up the deepest hitting set of this class
        cov = sum((s.measure() for s in levels), ZERO)
        if best is None or cov > best[0]:
            best = (cov, j, U, levels)
    cov, j0, U, levels = best
    lm = [s.measure() for s in levels]
    diag = dict(diagnostics or {})
    diag["hat_V_measure"] = scalar_json(sum(hm, ZERO))
    diag["V_measure"] = scalar_json(V.measure())
    diag["V_components"] = len(V)
    diag["hit_components"] = [len(s) for s in hits]
    diag["effective_depth"] = T_eff
    diag["dropped_depths"] = dropped
    return Tower(
        U=U, n0=n0, l=l, eps0=eps0, T=T_eff, levels=levels, level_measures=lm, S=S, j0=j0, hit_measures=hm, V=V,
        coverage=cov, low_mass=sum(lm[:l], ZERO), disjoint=levels_pairwise_disjoint(levels), diagnostics=diag,
    )


def build_tower(f: CircleMap, n0: int, l: int = 1, eps0: Fraction = Fraction(1, 10), T: int = 20,
                config: TowerConfig | None = None) -> Tower:
    """Run the full construction: cover, ``W``, ``V``, hitting-time split, residue choice."""
    cfg = config or TowerConfig(n0=n0, l=l, eps0=eps0, T=T)
    t0 = time.perf_counter()
    if cfg.n0 == 1:
        U = IntervalSet.unit()
        return Tower(U, 1, 1, cfg.eps0, cfg.T, [U], [ONE], [ONE], 0, [ONE], U, ONE, ONE, True,
                     diagnostics={"degenerate": True})
    N = cfg.N or cfg.n0
    eps_hat = cfg.eps_hat if cfg.eps_hat is not None else cfg.eps0 / 2
    hat_depth = cfg.hat_depth if cfg.hat_depth is not None else min(cfg.T, 12)
    w = build_W(f, N, eps_hat, hat_depth, merge_depth=cfg.merge_depth, cover_tol=cfg.cover_tol,
                max_merges=cfg.max_merges, cap=cfg.cap, strict=False)
    v = build_V(f, N, eps_hat, hat_depth, require_large_N=False, w=w, cap=cfg.cap)
    diag = {
        "N": N,
        "W_merges": w.merges,
        "W_hat_measure": scalar_json(w.hat_measure),
        "W_hat_target_reached": w.reached,
        "W_measure": scalar_json(w.W.measure()),
        "V_shift": v.shift,
    }
    tower = tower_from_V(f, v.V.Z, cfg.n0, cfg.l, cfg.eps0, cfg.T, cfg.cap, diag, adaptive=cfg.adaptive_depth,
                         max_components=cfg.max_U_components, prune=cfg.max_hit_components)
    tower.diagnostics["seconds"] = round(time.perf_counter() - t0, 3)
    return tower


def open_refinement(f: CircleMap, tower: Tower, slack: Fraction) -> Tower:
    """Shrink every component of ``U`` so that the closures of all levels are separated.

    The shrink radius ``s`` is chosen so that the total measure lost over all
    levels is at most ``slack``; both tower inequalities are then re-verified
    exactly on the shrunken (open) set, represented by its closure.
    """
    slack = as_scalar(slack)
    if slack <= 0:
        raise ValueError("slack must be positive")
    sigma = f.nonsingularity_constant()
    growth = sum((sigma**j for j in range(tower.n0)), ZERO)
    comps = max(1, len(tower.U))
    s = slack / (2 * comps * growth)
    # keep the shrink strictly inside each component
    shortest = min((hi - lo for lo, hi in tower.U.intervals), default=ONE)
    s = min(s, shortest / 4)
    U0 = tower.U.shrink(s)
    levels = levels_of(f, U0, tower.n0)
    lm = [x.measure() for x in levels]
    refined = Tower(
        U=U0, n0=tower.n0, l=tower.l, eps0=tower.eps0, T=tower.T, levels=levels, level_measures=lm, S=tower.S,
        j0=tower.j0, hit_measures=tower.hit_measures, V=tower.V, coverage=sum(lm, ZERO),
        low_mass=sum(lm[: tower.l], ZERO), disjoint=levels_pairwise_disjoint(levels), open=True,
        strict_gaps=levels_pairwise_disjoint(levels, closures=True, circle=f.mod1),
        diagnostics={**tower.diagnostics, "shrink": scalar_str(s), "slack": scalar_str(slack),
                     "lost": scalar_json(tower.coverage - sum(lm, ZERO))},
    )
    if tower.coverage - refined.coverage > slack:
        raise ConstructionError("shrinking lost more than the slack")
    if tower.valid and not refined.valid:
        raise ConstructionError("tower margin is smaller than the slack: the refined tower fails an inequality")
    return refined
