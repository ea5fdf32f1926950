"""Measure-escape certificates and the averaging oracle.

A certificate ``(K, N)`` with ``m(K) > 1 - eps`` and ``m(f^N K) < eps`` shows
that ``f`` lies in the open set of maps that push most of the space into a
small set; having such certificates for every ``eps`` rules out an absolutely
continuous invariant measure.  Certificates are checked with exact images.

The Cesàro averages ``(1/n)(m + f_*m + ... + f^{n-1}_*m)`` are approximated on
a grid by a sampled transfer matrix.  This is a diagnostic cross-check, not a
proof: only the concentration of the averaged density is reported.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import sparse

from .geometry import ONE, ZERO, IntervalSet, as_scalar, scalar_json
from .maps import AnyMap, CompressorPatch, PatchedMap

__all__ = [
    "EscapeCertificate",
    "Verdict",
    "image_mode",
    "verify_certificate",
    "search_certificate",
    "AveragedMeasure",
    "transfer_matrix",
    "kb_average",
    "concentration_statistic",
    "grid_image_measure",
    "write_density_csv",
    "write_profile_csv",
]

PROFILE_LEVELS = (0.1, 0.25, 0.5, 0.75, 0.9, 0.99)


def image_mode(f: AnyMap) -> str:
    """``"exact"`` when images under ``f`` are computed exactly, ``"enclosure"`` otherwise.

    Compressor patches over exact maps keep images exact (``h`` is monotone
    with an exact formula); linearisation patches fall back to certified
    enclosures.
    """
    while isinstance(f, PatchedMap):
        if not all(isinstance(p, CompressorPatch) for p in f.patches):
            return "enclosure"
        f = f.base
    return "exact" if f.is_exact else "enclosure"


@dataclass
class EscapeCertificate:
    K: IntervalSet
    N: int
    eps: Fraction
    m_K: Fraction | None = None
    m_image: Fraction | None = None  # m(f^N K), exact or an over-estimate
    mode: str | None = None
    image_eps: Fraction | None = None  # threshold for the image when it differs from eps

    def to_json(self) -> dict:
        return {
            "K": self.K.to_json(),
            "N": self.N,
            "eps": scalar_json(self.eps),
            "image_eps": scalar_json(self.image_eps) if self.image_eps is not None else None,
            "m_K": scalar_json(self.m_K) if self.m_K is not None else None,
            "m_image": scalar_json(self.m_image) if self.m_image is not None else None,
            "mode": self.mode,
        }


@dataclass
class Verdict:
    passed: bool
    lines: list[str]
    m_K: Fraction
    m_image: Fraction
    mode: str
    undecided: bool = False  # enclosure mode and the bound is not below eps
    gap: Fraction | None = None  # m_image - eps when the image test fails

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "ledger": self.lines,
            "m_K": scalar_json(self.m_K),
            "m_image": scalar_json(self.m_image),
            "mode": self.mode,
            "undecided": self.undecided,
            "gap": scalar_json(self.gap) if self.gap is not None else None,
        }


def verify_certificate(f: AnyMap, cert: EscapeCertificate, cap: int = 1_000_000) -> Verdict:
    """Check ``m(K) > 1 - eps`` and ``m(f^N K) < eps`` with exact rational arithmetic.

    In enclosure mode the image is over-estimated, so a pass is still sound;
    a failure is then reported as undecided together with the gap.
    """
    eps = as_scalar(cert.eps)
    img_eps = eps if cert.image_eps is None else as_scalar(cert.image_eps)
    K = cert.K
    if not K.is_subset(IntervalSet.unit()):
        raise ValueError("K must lie in [0, 1]")
    if cert.N < 0:
        raise ValueError("N must be non-negative")
    mode = image_mode(f)
    S = K
    for _ in range(cert.N):
        S = f.image(S)
        if len(S) > cap:
            raise MemoryError(f"image has {len(S)} components (cap {cap})")
    mK, mI = K.measure(), S.measure()
    ok_K = mK > 1 - eps
    ok_I = mI < img_eps
    lines = [
        f"m(K) = {float(mK):.6f} > 1 - eps = {float(1 - eps):.6f}: {'PASS' if ok_K else 'FAIL'}",
        f"m(f^{cert.N} K) {'=' if mode == 'exact' else '<='} {float(mI):.6f} < {float(img_eps):.6f}: "
        f"{'PASS' if ok_I else 'FAIL'}",
    ]
    cert.m_K, cert.m_image, cert.mode = mK, mI, mode
    return Verdict(ok_K and ok_I, lines, mK, mI, mode, undecided=(not ok_I and mode == "enclosure"),
                   gap=None if ok_I else mI - img_eps)


def search_certificate(f: AnyMap, eps, N_max: int, candidate_budget: int = 4096,
                       cells: int = 256) -> EscapeCertificate | None:
    """Look for ``(K, N)`` with ``K`` a union of grid cells of small ``f^N``-image.

    For each ``N <= N_max`` the cells are ranked by the exact measure of
    their ``N``-th image and taken greedily until ``m(K) > 1 - eps``; the
    union is then verified.  ``None`` means only that nothing was found within
    the budget (each cell image computed counts against it) — it is not
    evidence for an invariant density.
    """
    eps = as_scalar(eps)
    spent = 0
    grid = [(ONE * j / cells, ONE * (j + 1) / cells) for j in range(cells)]
    for N in range(1, N_max + 1):
        if spent + cells > candidate_budget:
            return None
        scored = []
        for lo, hi in grid:
            img = IntervalSet.from_pairs([(lo, hi)])
            for _ in range(N):
                img = f.image(img)
            scored.append((img.measure(), lo, hi))
        spent += cells
        scored.sort()
        chosen, mass = [], ZERO
        for _, lo, hi in scored:
            if mass > 1 - eps:
                break
            chosen.append((lo, hi))
            mass += hi - lo
        cert = EscapeCertificate(IntervalSet.from_pairs(chosen), N, eps)
        if verify_certificate(f, cert).passed:
            return cert
    return None


# ---------------------------------------------------------------------------
# grid oracle
# ---------------------------------------------------------------------------


@dataclass
class AveragedMeasure:
    G: int
    n: int
    density: np.ndarray  # cell masses, summing to 1
    profile: dict[float, int] = field(default_factory=dict)  # mass level -> fewest cells carrying it
    mass_errors: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"G": self.G, "n": self.n, "profile": {str(q): c for q, c in self.profile.items()},
                "max_mass_error": max(self.mass_errors, default=0.0)}


def _sample_points(G: int, s: int, seed: int) -> np.ndarray:
    """``s`` stratified points in every cell, jittered within each stratum; shape ``(G, s)``."""
    rng = np.random.default_rng(seed)
    u = rng.random((G, s))
    j = np.arange(s)[None, :]
    c = np.arange(G)[:, None]
    return (c + (j + u) / s) / G


def transfer_matrix(f: AnyMap, G: int, s: int = 32, seed: int = 0) -> sparse.csr_matrix:
    """Row-stochastic ``G x G`` matrix: row ``c`` spreads cell ``c``'s mass over the cells its samples hit."""
    X = _sample_points(G, s, seed)
    Y = f.evaluate_array(X.ravel())
    if f.mod1:
        Y = np.mod(Y, 1.0)
    cols = np.clip(np.floor(Y * G).astype(np.int64), 0, G - 1)
    rows = np.repeat(np.arange(G), s)
    P = sparse.csr_matrix((np.full(G * s, 1.0 / s), (rows, cols)), shape=(G, G))
    P.sum_duplicates()
    return P


def _profile(density: np.ndarray, levels=PROFILE_LEVELS) -> dict[float, int]:
    order = np.sort(density)[::-1]
    cum = np.cumsum(order)
    return {q: int(np.searchsorted(cum, q * cum[-1] - 1e-15) + 1) for q in levels}


def kb_average(f: AnyMap, n: int, G: int, s: int = 32, seed: int = 0) -> AveragedMeasure:
    """Grid approximation of ``(1/n) sum_{j<n} f^j_* m`` started from the uniform density."""
    if G < 2 or n < 1:
        raise ValueError("need G >= 2 and n >= 1")
    P = transfer_matrix(f, G, s, seed).T.tocsr()  # column form: mu_{j+1} = P mu_j
    mu = np.full(G, 1.0 / G)
    acc = np.zeros(G)
    errs = []
    for _ in range(n):
        acc += mu
        mu = P @ mu
        total = mu.sum()
        errs.append(abs(total - 1.0))
        mu /= total
    acc /= n
    acc /= acc.sum()
    return AveragedMeasure(G, n, acc, _profile(acc), errs)


def concentration_statistic(a: AveragedMeasure, q: float) -> float:
    """Lebesgue measure (cells / G) of the smallest cell set carrying at least ``q`` of the mass."""
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    order = np.sort(a.density)[::-1]
    cum = np.cumsum(order)
    count = int(np.searchsorted(cum, q * cum[-1] - 1e-15) + 1)
    return count / a.G


def _lift_orbit(f: AnyMap, x: np.ndarray, N: int) -> np.ndarray:
    """Lift of ``f^N`` on an array, using ``F(x + 1) = F(x) + deg``."""
    if not f.mod1:
        for _ in range(N):
            x = f.lift_array(x)
        return x
    deg = float(f.lift(1) - f.lift(0))
    for _ in range(N):
        fl = np.floor(x)
        x = f.lift_array(x - fl) + deg * fl
    return x


def grid_image_measure(f: AnyMap, K: IntervalSet, N: int, G: int, per_cell: int = 4) -> float:
    """Measure of the grid cells met by ``f^N(K)``.

    Each component of ``K`` is cut into short segments whose images (on the
    lift) are the intervals between consecutive image points; every cell
    meeting one of them is painted.  Float evaluation — a cross-check, not a
    certificate; the over-count is at most two cells per image component.
    """
    diff = np.zeros(G + 1, dtype=np.int64)
    for lo, hi in K.intervals:
        a, b = float(lo), float(hi)
        m = max(2, int(np.ceil((b - a) * G * per_cell)) + 1)
        y = _lift_orbit(f, np.linspace(a, b, m), N)
        lo_y, hi_y = np.minimum(y[:-1], y[1:]), np.maximum(y[:-1], y[1:])
        ca = np.floor(lo_y * G).astype(np.int64)
        cb = np.floor(hi_y * G).astype(np.int64)
        if f.mod1:
            full = (cb - ca) >= G - 1
            if np.any(full):
                return 1.0
            sa, sb = np.mod(ca, G), np.mod(cb, G)
            wrap = sb < sa
            np.add.at(diff, sa, 1)
            np.add.at(diff, np.where(wrap, G, sb + 1), -1)
            np.add.at(diff, np.zeros(int(wrap.sum()), dtype=np.int64), 1)
            np.add.at(diff, sb[wrap] + 1, -1)
        else:
            ca, cb = np.clip(ca, 0, G - 1), np.clip(cb, 0, G - 1)
            np.add.at(diff, ca, 1)
            np.add.at(diff, cb + 1, -1)
    hit = np.cumsum(diff[:G]) > 0
    return float(hit.sum()) / G


def write_density_csv(a: AveragedMeasure, path: str | os.PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cell", "left", "mass"])
        for c, m in enumerate(a.density):
            w.writerow([c, c / a.G, f"{m:.12e}"])


def write_profile_csv(a: AveragedMeasure, path: str | os.PathLike, levels=PROFILE_LEVELS) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "cells", "measure"])
        for q in levels:
            c = _profile(a.density, (q,))[q]
            w.writerow([q, c, c / a.G])
