"""End-to-end construction of a perturbation with an escape certificate (d = 1).

Starting from an exact expanding circle map ``f`` and ``eps``:

1. build a Rokhlin tower ``Q_0, ..., Q_n`` (``Q_i = f^{-i} Q_0``) with few
   low levels and large total measure, and linearise ``f`` on it;
2. place intervals ``U_0(y)`` in ``Q_0``, pull them back along every inverse
   branch to ``U_i(ybar)`` and put a compressor on each one, giving
   ``g = f o h`` there;
3. assemble ``K = ⋃_{i>=k} V_i(ybar)`` and verify exactly that
   ``m(M \\ K) < 4 eps`` and ``m(g^k K) < eps``.

Every inequality is checked in exact rational arithmetic.  Failing checks are
reported as ``FAIL`` ledger lines; nothing is silently retried.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

from gmpy2 import mpq

from . import rokhlin
from .escape import EscapeCertificate, Verdict, verify_certificate
from .geometry import ONE, ZERO, IntervalSet, as_scalar, scalar_json, scalar_str
from .linearize import check_locally_linear, vitali_cover
from .maps import Bump, CircleMap, CompressorPatch, NotExactError, PatchedMap, c1_distance_bound
from .slicing import compute_k, compute_kappa

__all__ = [
    "PipelineConfig",
    "TowerLinearization",
    "BranchTree",
    "PipelineReport",
    "default_delta",
    "kappa_for_k",
    "step1",
    "step2",
    "step3",
    "run",
]


@dataclass
class PipelineConfig:
    eps: Fraction = Fraction(1, 10)
    delta: Fraction | None = None  # default: the largest power of 1/2 below eps
    k: int | None = None  # override of the slicing calculus (see kappa_for_k)
    n: int | None = None  # default: least n with k/(n+1) < eps
    T: int | None = None  # tower truncation depth (default 2(n+1))
    goodness: int = 4  # order of goodness used for the marker set of the tower
    max_merges: int | None = 1
    cover_tol: Fraction = Fraction(1, 10)
    tower_cap: int = 200_000
    max_hit_components: int = 20_000
    max_components: int = 64  # components of Q_0 kept ("slight shrinking")
    node_cap: int = 2_000_000
    c1_budget: Fraction | None = None  # default eps * (1 + max |f'|)
    seed: int = 0  # recorded; the construction itself is deterministic

    def __post_init__(self):
        self.eps = as_scalar(self.eps)
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if self.delta is not None:
            self.delta = as_scalar(self.delta)
        if self.c1_budget is not None:
            self.c1_budget = as_scalar(self.c1_budget)
        self.cover_tol = as_scalar(self.cover_tol)
        if self.k is not None and self.k < 1:
            raise ValueError("k must be positive")

    def to_json(self) -> dict:
        out = {}
        for key, value in asdict(self).items():
            out[key] = scalar_str(value) if hasattr(value, "denominator") and not isinstance(value, int) else value
        return out


def default_delta(eps) -> Fraction:
    """The largest ``2^-m`` strictly below ``eps`` (so ``1 - delta > 1 - eps`` in dimension one)."""
    eps = as_scalar(eps)
    delta = mpq(1, 2)
    while not delta < eps:
        delta /= 2
    return delta


def kappa_for_k(delta, k: int) -> Fraction:
    """A rational ``kappa`` slightly below ``(delta/(1-delta))^(1/k)``, so ``kappa^k < delta/(1-delta)`` exactly."""
    delta = as_scalar(delta)
    target = delta / (1 - delta)
    root = float(target) ** (1.0 / k)
    kappa = mpq(math.floor(min(root, 1.0) * 0.99 * 10**9), 10**9)
    while not kappa**k < target:
        kappa *= mpq(99, 100)
    return kappa


def _line(name: str, ok: bool, detail: str = "") -> str:
    return f"{name}{': ' + detail if detail else ''}: {'PASS' if ok else 'FAIL'}"


# ---------------------------------------------------------------------------
# step 1
# ---------------------------------------------------------------------------


@dataclass
class TowerLinearization:
    eps: Fraction
    delta: Fraction
    k: int
    n: int
    kappa: Fraction
    k_source: str  # "calculus" or "override"
    tower: rokhlin.Tower
    Q: list[IntervalSet]
    f_tilde: CircleMap | PatchedMap
    lin_c1: Fraction
    checks: dict[str, bool]
    lines: list[str]

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {
            "eps": scalar_str(self.eps),
            "delta": scalar_str(self.delta),
            "k": self.k,
            "k_source": self.k_source,
            "n": self.n,
            "kappa": scalar_str(self.kappa),
            "Q_measures": [scalar_json(q.measure()) for q in self.Q],
            "Q_components": [len(q) for q in self.Q],
            "linearization_c1": scalar_json(self.lin_c1),
            "tower": {key: v for key, v in self.tower.to_json().items() if key != "U"},
            "ledger": self.lines,
        }


def _split_at(S: IntervalSet, cuts) -> list[tuple[Fraction, Fraction]]:
    out = []
    for lo, hi in S.intervals:
        inner = sorted(c for c in cuts if lo < c < hi)
        edges = [lo, *inner, hi]
        out.extend(zip(edges, edges[1:]))
    return out


def step1(f: CircleMap, eps, config: PipelineConfig | None = None) -> TowerLinearization:
    """Open tower with ``l = k``, ``n0 = n + 1``, ``eps0 = eps/2`` and the linearised map."""
    cfg = config or PipelineConfig(eps=eps)
    eps = as_scalar(eps)
    if not isinstance(f, CircleMap) or not f.is_exact:
        raise NotExactError("the certified pipeline needs an exact (piecewise-affine) circle map")
    if not f.is_expanding():
        raise ValueError("the pipeline needs an expanding map (periodic points must be null)")
    delta = cfg.delta if cfg.delta is not None else default_delta(eps)
    if not (0 < delta < eps and 1 - delta > 1 - eps):
        raise ValueError("need 0 < delta < eps with (1 - delta) > 1 - eps")
    if cfg.k is None:
        k, kappa, source = compute_k(eps, delta), compute_kappa(eps, delta), "calculus"
    else:
        k, kappa, source = cfg.k, kappa_for_k(delta, cfg.k), "override"
    n = cfg.n if cfg.n is not None else int(math.floor(k / eps))  # least n with k/(n+1) < eps
    while not mpq(k, n + 1) < eps:
        n += 1
    T = cfg.T if cfg.T is not None else 2 * (n + 1)
    tcfg = rokhlin.TowerConfig(
        n0=n + 1, l=k, eps0=eps / 2, T=T, N=min(cfg.goodness, n + 1), cover_tol=cfg.cover_tol,
        max_merges=cfg.max_merges, cap=cfg.tower_cap, adaptive_depth=True,
        max_U_components=cfg.max_components, max_hit_components=cfg.max_hit_components,
    )
    tower = rokhlin.build_tower(f, n + 1, k, eps / 2, T, config=tcfg)
    Q = tower.levels  # Q_i = f^{-i}(Q_0); interiors are the open levels
    # f is affine on each piece of Q_i cut at the break points: the linearisation is f itself
    f_tilde = f
    pieces_linear = all(check_locally_linear(f_tilde, IntervalSet.from_pairs([p]))
                        for q in Q for p in _split_at(q, f.break_points()))
    low = sum((q.measure() for q in Q[:k]), ZERO)
    total = sum((q.measure() for q in Q), ZERO)
    checks = {
        "levels disjoint": tower.disjoint,
        "sum_(i<k) m(Q_i) < eps": low < eps,
        "sum_(i<=n) m(Q_i) > 1 - eps": total > 1 - eps,
        "f~ affine on every piece of Q_i": pieces_linear,
    }
    lines = [
        _line("levels Q_0..Q_n pairwise interior-disjoint", tower.disjoint),
        _line(f"sum_(i<{k}) m(Q_i) < eps", low < eps, f"{float(low):.6f} vs {float(eps):.6f}"),
        _line(f"sum_(i<={n}) m(Q_i) > 1 - eps", total > 1 - eps, f"{float(total):.6f} vs {float(1 - eps):.6f}"),
        _line("f~ locally linear and injective on each piece of Q_i", pieces_linear),
    ]
    return TowerLinearization(eps, delta, k, n, kappa, source, tower, Q, f_tilde, ZERO, checks, lines)


# ---------------------------------------------------------------------------
# step 2
# ---------------------------------------------------------------------------


@dataclass
class BranchTree:
    """Intervals ``U_i(ybar) = [c - w, c + w]``; ``parent[i][j]`` indexes level ``i - 1``."""

    tau: Fraction
    centers: list[list[Fraction]]
    widths: list[list[Fraction]]
    parent: list[list[int]]
    slopes: list[list[Fraction]]  # |f'| at the centre (the branch slope)
    lost: Fraction  # measure of pull-backs not contained in a single branch
    shrink_failures: list[dict] = field(default_factory=list)
    checks: dict[str, bool] = field(default_factory=dict)
    lines: list[str] = field(default_factory=list)

    def level_set(self, i: int, scale: Fraction = ONE) -> IntervalSet:
        return IntervalSet.from_pairs([(c - scale * w, c + scale * w) for c, w in zip(self.centers[i], self.widths[i])])

    def ancestor(self, i: int, j: int, steps: int) -> int:
        for s in range(steps):
            j = self.parent[i - s][j]
        return j

    @property
    def node_count(self) -> int:
        return sum(len(c) for c in self.centers)


def step2(tl: TowerLinearization, eps, delta, config: PipelineConfig | None = None) -> tuple[PatchedMap, BranchTree]:
    """Vitali intervals in ``Q_0``, their inverse-branch pull-backs and the compressors."""
    cfg = config or PipelineConfig(eps=eps)
    eps, delta = as_scalar(eps), as_scalar(delta)
    f = tl.f_tilde
    n, k, kappa = tl.n, tl.k, tl.kappa
    Q0 = tl.Q[0]
    # one interval per component of Q_0 (the components are intervals already); fill 1 - eps/8
    cover = vitali_cover(Q0, eps, ONE) if len(Q0) else None
    centers = [[p for p, _ in cover.balls]] if cover else [[]]
    widths = [[r for _, r in cover.balls]] if cover else [[]]
    parent: list[list[int]] = [[-1] * len(centers[0])]
    subs = f.sub_branches()
    slopes = [[abs(subs[_sub_index(subs, c)].slope) for c in centers[0]]]
    lost = ZERO
    count = len(centers[0])
    for i in range(1, n + 1):
        cs, ws, ps, ss = [], [], [], []
        for j, (c, w) in enumerate(zip(centers[i - 1], widths[i - 1])):
            for s in subs:
                ylo, yhi = s.range
                if ylo <= c - w and c + w <= yhi:
                    x = s.inverse(c)
                    cs.append(x)
                    ws.append(w / abs(s.slope))
                    ps.append(j)
                elif ylo < c + w and c - w < yhi:
                    lost += (min(yhi, c + w) - max(ylo, c - w)) / abs(s.slope)
        count += len(cs)
        if count > cfg.node_cap:
            raise rokhlin.ResourceCapError(f"branch tree: {count} intervals exceeds cap {cfg.node_cap}")
        order = sorted(range(len(cs)), key=lambda t: cs[t])
        centers.append([cs[t] for t in order])
        widths.append([ws[t] for t in order])
        parent.append([ps[t] for t in order])
        slopes.append([abs(subs[_sub_index(subs, cs[t])].slope) for t in order])
    # d = 1: any tau works; the pull-back intervals are U_i itself
    bt = BranchTree(ONE / 2, centers, widths, parent, slopes, lost)
    # compressors on U_i(ybar), 1 <= i <= n
    bump = Bump(delta / 2)
    patches = [CompressorPatch(c, w, kappa, bump, sl)
               for i in range(1, n + 1) for c, w, sl in zip(centers[i], widths[i], slopes[i])]
    g = PatchedMap(f, patches, name=f"compressed({f.name})")

    # exact checks
    inside = all(bt.level_set(i).is_subset(tl.Q[i]) for i in range(n + 1))
    disjoint = all(_pairwise_disjoint(bt, i) for i in range(n + 1))
    m_q0 = Q0.measure()
    vit_def = Q0.subtract(bt.level_set(0)).measure()
    vitali_ok = vit_def <= eps * m_q0
    comp_v = 1 - delta > 1 - eps  # m(V_i)/m(U_i) = 1 - delta for every interval
    comp_w = delta < eps  # m(W_i)/m(U_i) = delta
    failures = []
    for i in range(k, n + 1):
        for j, (c, w) in enumerate(zip(centers[i], widths[i])):
            img = IntervalSet.from_pairs([(c - (1 - delta) * w, c + (1 - delta) * w)])
            for _ in range(k):
                img = g.image(img)
            a = bt.ancestor(i, j, k)
            ca, wa = centers[i - k][a], widths[i - k][a]
            target = IntervalSet.from_pairs([(ca - delta * wa, ca + delta * wa)])
            if not img.is_subset(target):
                failures.append({"level": i, "index": j, "center": scalar_str(c),
                                 "image": img.to_json(), "target": target.to_json()})
                if len(failures) >= 10:
                    break
        if len(failures) >= 10:
            break
    bt.shrink_failures = failures
    bt.checks = {
        "U_i(ybar) inside Q_i": inside,
        "U_i(ybar) pairwise disjoint": disjoint,
        "m(Q_0 minus U_0) <= eps m(Q_0)": vitali_ok,
        "m(V)/m(U) > 1 - eps": comp_v,
        "m(W)/m(U) < eps": comp_w,
        "g^k V_i(ybar) inside W_(i-k)(ybar)": not failures,
    }
    bt.lines = [
        _line("U_i(ybar) contained in Q_i", inside),
        _line("U_i(ybar) pairwise disjoint", disjoint),
        _line("m(Q_0 minus U_0) <= eps m(Q_0)", vitali_ok, f"{float(vit_def):.6g} vs {float(eps * m_q0):.6g}"),
        _line("m(V_i)/m(U_i) > 1 - eps", comp_v, f"{float(1 - delta):.6f}"),
        _line("m(W_i)/m(U_i) < eps", comp_w, f"{float(delta):.6f}"),
        _line(f"g^{k} V_i(ybar) inside W_(i-{k})(ybar) for all i >= k", not failures,
              f"{sum(len(c) for c in centers[k:])} intervals checked exactly"),
    ]
    return g, bt


def _sub_index(subs, x: Fraction) -> int:
    for t, s in enumerate(subs):
        if s.lo <= x < s.hi:
            return t
    return len(subs) - 1


def _pairwise_disjoint(bt: BranchTree, i: int) -> bool:
    ivs = sorted((c - w, c + w) for c, w in zip(bt.centers[i], bt.widths[i]))
    return all(b[0] >= a[1] for a, b in zip(ivs, ivs[1:]))


# ---------------------------------------------------------------------------
# step 3
# ---------------------------------------------------------------------------


@dataclass
class PipelineReport:
    config: dict
    params: dict
    g: PatchedMap
    K: IntervalSet
    certificate: EscapeCertificate
    verdict: Verdict
    decomposition: dict[str, Fraction]
    c1: dict[str, Fraction]
    checks: dict[str, bool]
    lines: list[str]
    step1: TowerLinearization
    tree: BranchTree
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "params": self.params,
            "passed": self.passed,
            "ledger": self.lines,
            "checks": self.checks,
            "decomposition": {key: scalar_json(v) for key, v in self.decomposition.items()},
            "c1": {key: scalar_json(v) for key, v in self.c1.items()},
            "certificate": {
                "N": self.certificate.N,
                "eps": scalar_json(self.certificate.eps),
                "image_eps": scalar_json(self.certificate.image_eps),
                "m_K": scalar_json(self.verdict.m_K),
                "m_image": scalar_json(self.verdict.m_image),
                "K_components": len(self.K),
                "mode": self.verdict.mode,
                "passed": self.verdict.passed,
            },
            "step1": self.step1.to_json(),
            "tree": {"nodes": self.tree.node_count, "tau": scalar_str(self.tree.tau),
                     "lost": scalar_json(self.tree.lost), "shrink_failures": self.tree.shrink_failures},
            "compressors": len(self.g.patches),
            "seconds": self.seconds,
        }


def step3(g: PatchedMap, bt: BranchTree, tl: TowerLinearization, eps,
          config: PipelineConfig | None = None) -> PipelineReport:
    """``K``, the four-part decomposition of its complement, the certificate and the C¹ ledger."""
    cfg = config or PipelineConfig(eps=eps)
    eps = as_scalar(eps)
    k, n, delta = tl.k, tl.n, tl.delta
    U = [bt.level_set(i) for i in range(n + 1)]
    V = [bt.level_set(i, 1 - delta) for i in range(n + 1)]
    W = [bt.level_set(i, delta) for i in range(n + 1)]
    K = IntervalSet.empty()
    for i in range(k, n + 1):
        K = K.union(V[i])
    Qall = IntervalSet.empty()
    for q in tl.Q:
        Qall = Qall.union(q)
    parts = {
        "I": IntervalSet.unit().subtract(Qall),
        "II": _union(tl.Q[i].subtract(U[i]) for i in range(n + 1)),
        "III": _union(U[i].subtract(V[i]) for i in range(n + 1)),
        "IV": _union(V[i] for i in range(k)),
    }
    meas = {key: s.measure() for key, s in parts.items()}
    complement = 1 - K.measure()
    partition_ok = sum(meas.values(), ZERO) == complement
    cert = EscapeCertificate(K, k, 4 * eps, image_eps=eps)
    verdict = verify_certificate(g, cert)
    m_img = verdict.m_image
    u_all = _union(U)
    w_bound = eps * u_all.measure()
    # C¹ ledger
    max_slope = max(abs(s.slope) for s in tl.f_tilde.sub_branches())
    comp_c1 = max((p.c1_bound() for p in g.patches), default=ZERO)
    total_c1 = c1_distance_bound(tl.f_tilde, g) + tl.lin_c1
    budget = cfg.c1_budget if cfg.c1_budget is not None else eps * (1 + max_slope)
    checks = {
        "step1": tl.ok,
        "step2": all(bt.checks.values()),
        "m(I) < eps": meas["I"] < eps,
        "m(II) < eps": meas["II"] < eps,
        "m(III) <= eps": meas["III"] <= eps,
        "m(IV) < eps": meas["IV"] < eps,
        "I..IV partition the complement of K": partition_ok,
        "m(M minus K) < 4 eps": complement < 4 * eps,
        "m(g^k K) < eps": m_img < eps,
        "m(g^k K) <= eps m(union U)": m_img <= w_bound,
        "C1 bound within budget": total_c1 < budget,
    }
    lines = [*tl.lines, *bt.lines]
    for key in ("I", "II", "III", "IV"):
        rel = "<=" if key == "III" else "<"
        lines.append(_line(f"m({key}) {rel} eps", checks[f"m({key}) {rel} eps"],
                           f"{float(meas[key]):.6f} vs {float(eps):.6f}"))
    lines += [
        _line("I, II, III, IV partition M minus K", partition_ok),
        _line("m(M minus K) < 4 eps", complement < 4 * eps, f"{float(complement):.6f} vs {float(4 * eps):.6f}"),
        *verdict.lines,
        _line(f"m(g^{k} K) <= eps m(union U_i)", m_img <= w_bound, f"{float(m_img):.6g} vs {float(w_bound):.6g}"),
        _line("C1 bound f -> g within budget", total_c1 < budget, f"{float(total_c1):.6g} vs {float(budget):.6g}"),
    ]
    params = {
        "eps": scalar_str(eps),
        "delta": scalar_str(delta),
        "k": k,
        "k_source": tl.k_source,
        "n": n,
        "kappa": scalar_str(tl.kappa),
        "tau": scalar_str(bt.tau),
        "c1_budget": scalar_str(budget),
    }
    c1 = {"f_to_f_tilde": tl.lin_c1, "f_tilde_to_g": comp_c1, "f_to_g": total_c1, "budget": budget,
          "composition_bound": eps * (1 + max_slope)}
    return PipelineReport(cfg.to_json(), params, g, K, cert, verdict, meas, c1, checks, lines, tl, bt)


def _union(sets) -> IntervalSet:
    out = IntervalSet.empty()
    for s in sets:
        out = out.union(s)
    return out


def run(f: CircleMap, eps=None, config: PipelineConfig | None = None) -> PipelineReport:
    """Steps 1–3 in sequence."""
    cfg = config or PipelineConfig(eps=eps if eps is not None else Fraction(1, 10))
    eps = cfg.eps if eps is None else as_scalar(eps)
    t0 = time.perf_counter()
    tl = step1(f, eps, cfg)
    g, bt = step2(tl, eps, tl.delta, cfg)
    report = step3(g, bt, tl, eps, cfg)
    report.seconds = round(time.perf_counter() - t0, 3)
    return report
