"""Compressors along a sequence of linear maps.

Given invertible ``L_1, ..., L_n`` on R^d the module produces the parameter
calculus (``kappa``, ``k``, ``lambda``, ``tau_0``), a normalised form of the
sequence in which every map preserves the hyperplane ``R^{d-1}``, the
compressor diffeomorphisms ``H_i`` and numerical verification of

* ``DH_i`` being ``eps``-close to the identity,
* ``H_i`` being the identity off its support,
* the shrink inclusion
  ``L_{i-k+1} H_{i-k+1} ... L_i H_i (V_i) ⊂ W_{i-k}``.

Coordinates
-----------
Level ``i`` uses the rotated frame in which ``L~_i = R_{i-1} L_i R_i^T``
is block upper-triangular ``[[A_i, b_i], [0, c_i]]``.  Compressors are
expressed in these frames; the rotations are orthogonal, so derivative
bounds are unaffected.  For verification of the shrink inclusion a point at
level ``j`` is carried in *base coordinates* ``y = G_j x`` with
``G_j = L~_1 ... L~_j``: the linear maps leave ``y`` unchanged, ``V_i`` and
``W_{i-k}`` become the fixed boxes ``V_0`` and ``W_0``, and only the
compressors move points.  This keeps the check well conditioned even when
the chain itself is not.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from gmpy2 import mpq
from scipy.stats import qmc

from .geometry import ONE, ZERO, as_scalar, scalar_str

__all__ = [
    "compute_kappa",
    "compute_k",
    "choose_lambda",
    "exact_det",
    "parse_sequence",
    "random_sequence",
    "NormalizedSeq",
    "normalize_sequence",
    "compute_tau0",
    "SlicingPlan",
    "make_plan",
    "Compressor",
    "build_compressor",
    "evaluate_H",
    "jacobian_H",
    "check_jacobian_near_id",
    "check_identity_outside",
    "verify_sandwich",
    "ShrinkVerdict",
    "verify_shrink",
]


# ---------------------------------------------------------------------------
# parameter calculus (exact)
# ---------------------------------------------------------------------------


def compute_kappa(eps, delta) -> Fraction:
    """Midpoint between the critical value ``1 - eps/(1 + 2/delta)`` and 1.

    >>> compute_kappa(Fraction(1, 2), Fraction(1, 2))
    mpq(19,20)
    """
    eps, delta = as_scalar(eps), as_scalar(delta)
    if eps <= 0 or not 0 < delta < 1:
        raise ValueError("need eps > 0 and 0 < delta < 1")
    crit = 1 - eps / (1 + 2 / delta)
    if crit <= 0:
        return mpq(1, 2)
    return (crit + 1) / 2


def compute_k(eps, delta) -> int:
    """Least ``k >= 1`` with ``kappa^k < delta/(1 - delta)`` for ``kappa = compute_kappa(eps, delta)``."""
    delta = as_scalar(delta)
    kappa = compute_kappa(eps, delta)
    target = delta / (1 - delta)
    k, power = 1, kappa
    while not power < target:
        k += 1
        power *= kappa
    return k


def choose_lambda(delta, n: int) -> Fraction:
    """A rational ``lambda > 1`` with ``lambda^{3n} < (1 - delta/2)/(1 - delta)``, checked exactly."""
    delta = as_scalar(delta)
    if n < 1:
        raise ValueError("n must be positive")
    q = (1 - delta / 2) / (1 - delta)
    step = math.log(float(q)) / (6 * n)
    lam = 1 + mpq(math.floor(step * 10**12), 10**12)
    while not (lam > 1 and lam ** (3 * n) < q):
        lam = 1 + (lam - 1) / 2
    return lam


# ---------------------------------------------------------------------------
# matrices
# ---------------------------------------------------------------------------


def exact_det(M: Sequence[Sequence]) -> Fraction:
    """Determinant by fraction-exact Gaussian elimination."""
    A = [[as_scalar(x) for x in row] for row in M]
    d = len(A)
    det = ONE
    for c in range(d):
        p = next((r for r in range(c, d) if A[r][c] != 0), None)
        if p is None:
            return ZERO
        if p != c:
            A[c], A[p] = A[p], A[c]
            det = -det
        det *= A[c][c]
        for r in range(c + 1, d):
            f = A[r][c] / A[c][c]
            if f:
                A[r] = [a - f * b for a, b in zip(A[r], A[c])]
    return det


def parse_sequence(obj) -> list[list[list[Fraction]]]:
    """Matrices from JSON-like data (``{"matrices": [...]}`` or a bare list); entries "p/q"."""
    mats = obj["matrices"] if isinstance(obj, dict) else obj
    out = []
    for M in mats:
        rows = [[as_scalar(x) for x in row] for row in M]
        if any(len(r) != len(rows) for r in rows):
            raise ValueError("matrices must be square")
        if exact_det(rows) == 0:
            raise ValueError("singular matrix in sequence")
        out.append(rows)
    if not out or any(len(M) != len(out[0]) for M in out):
        raise ValueError("need a non-empty sequence of equal-size matrices")
    return out


def random_sequence(rng: np.random.Generator, d: int, n: int, bound: int = 2, denom: int = 8,
                    cond_max: float = 10.0) -> list[list[list[Fraction]]]:
    """Random rational matrices with entries ``j/denom`` in ``[-bound, bound]`` and condition ``<= cond_max``."""
    out = []
    while len(out) < n:
        ints = rng.integers(-bound * denom, bound * denom + 1, size=(d, d))
        M = [[mpq(int(v), denom) for v in row] for row in ints]
        if exact_det(M) == 0:
            continue
        if np.linalg.cond(ints.astype(float)) > cond_max:
            continue
        out.append(M)
    return out


def _to_float(M) -> np.ndarray:
    return np.array([[float(x) for x in row] for row in M], dtype=float)


# ---------------------------------------------------------------------------
# normalisation
# ---------------------------------------------------------------------------


def _reflector(nu: np.ndarray) -> np.ndarray:
    """Orthogonal ``R`` with ``R nu = ±e_d``; the identity when ``nu`` is already a multiple of ``e_d``."""
    d = nu.size
    if not np.any(nu[:-1]):
        return np.eye(d)
    e = np.zeros(d)
    e[-1] = 1.0
    u = nu + math.copysign(1.0, nu[-1]) * e
    return np.eye(d) - 2.0 * np.outer(u, u) / (u @ u)


@dataclass
class NormalizedSeq:
    """A matrix chain in hyperplane-preserving frames.

    ``A, b, c`` are the blocks of ``L~_i`` (index 0 unused), ``Minv[i]`` maps
    the ball ``C_i`` back to the cube (``||z||_{*i} = ||Minv[i] z||_inf``),
    ``alpha[i] = prod_{j<=i} 1/|c_j|`` and ``p[i], gamma[i]`` are the blocks of
    ``G_i e_d``.
    """

    d: int
    n: int
    exact: list  # the input matrices (rationals)
    L: list[np.ndarray]  # float copies
    R: list[np.ndarray]
    Lt: list[np.ndarray]  # normalised maps, last row forced block-triangular
    residual: float  # largest |entry| removed from the last rows (rotation error bar)
    A: list[np.ndarray]
    b: list[np.ndarray]
    c: list[float]
    Minv: list[np.ndarray]
    alpha: list[float]
    beta: list[float]
    p: list[np.ndarray]
    gamma: list[float]

    def ball_norm(self, i: int, z: np.ndarray) -> np.ndarray:
        """``||z||_{*i}`` row-wise for ``z`` of shape ``(N, d-1)``."""
        if self.d == 1:
            return np.zeros(z.shape[0])
        return np.abs(z @ self.Minv[i].T).max(axis=1)

    def comparison_constant(self, i: int) -> float:
        """``C`` with ``||v||_{*i} <= C ||v||``: the largest row 2-norm of ``Minv[i]``."""
        if self.d == 1:
            return 0.0
        return float(np.linalg.norm(self.Minv[i], axis=1).max())

    def to_json(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "residual": self.residual,
            "alpha": self.alpha,
            "beta": self.beta,
            "normalized": [M.tolist() for M in self.Lt[1:]],
        }


def normalize_sequence(L: Sequence) -> NormalizedSeq:
    """Rotate frames so that each map preserves ``R^{d-1}``.

    The hyperplane chain is ``P_0 = R^{d-1}``, ``P_i = L_i^{-1} P_{i-1}``; its
    normals obey ``nu_i ∝ L_i^T nu_{i-1}`` and ``R_i`` is a Householder
    reflection sending ``nu_i`` to ``±e_d``.
    """
    exact = [[[as_scalar(x) for x in row] for row in M] for M in L]
    if not exact:
        raise ValueError("empty sequence")
    d = len(exact[0])
    for M in exact:
        if len(M) != d or exact_det(M) == 0:
            raise ValueError("sequence must consist of invertible d x d matrices")
    n = len(exact)
    Lf = [np.eye(d)] + [_to_float(M) for M in exact]
    R = [np.eye(d)]
    nu = np.zeros(d)
    nu[-1] = 1.0
    Lt = [np.eye(d)]
    residual = 0.0
    for i in range(1, n + 1):
        nu = Lf[i].T @ nu
        nu = nu / np.linalg.norm(nu)
        R.append(_reflector(nu))
        M = R[i - 1] @ Lf[i] @ R[i].T
        residual = max(residual, float(np.abs(M[-1, :-1]).max(initial=0.0)))
        M[-1, :-1] = 0.0
        Lt.append(M)
    A = [np.eye(d - 1)] + [M[:-1, :-1] for M in Lt[1:]]
    b = [np.zeros(d - 1)] + [M[:-1, -1] for M in Lt[1:]]
    c = [1.0] + [float(M[-1, -1]) for M in Lt[1:]]
    Minv = [np.eye(d - 1)]
    alpha = [1.0]
    G = np.eye(d)
    p = [np.zeros(d - 1)]
    gamma = [1.0]
    for i in range(1, n + 1):
        Minv.append(Minv[-1] @ A[i])  # M_i^{-1} = A_1 ... A_i
        alpha.append(alpha[-1] / abs(c[i]))
        G = G @ Lt[i]
        p.append(G[:-1, -1].copy())
        gamma.append(float(G[-1, -1]))
    beta = [1.0] + [1.0 / abs(ci) for ci in c[1:]]
    return NormalizedSeq(d, n, exact, Lf, R, Lt, residual, A, b, c, Minv, alpha, beta, p, gamma)


# ---------------------------------------------------------------------------
# tau_0
# ---------------------------------------------------------------------------


def _box_vertices(d: int) -> np.ndarray:
    return np.array(list(itertools.product((-1.0, 1.0), repeat=d)))


def verify_sandwich(seq: NormalizedSeq, i: int, lam: float, a: float, b: float, tol: float = 1e-9) -> bool:
    """Vertex check of ``B_i[a/lam, b] ⊂ L_i^{-1} B_{i-1}[a, b] ⊂ B_i[lam a, b]`` (level frames)."""
    d = seq.d
    V = _box_vertices(d)
    inv_prev = np.linalg.inv(seq.Minv[i - 1]) if d > 1 else np.zeros((0, 0))
    inv_cur = np.linalg.inv(seq.Minv[i]) if d > 1 else np.zeros((0, 0))
    Linv = np.linalg.inv(seq.Lt[i])

    def verts(inv_M, alpha, aa, bb):
        z = (V[:, :-1] * aa) @ inv_M.T
        t = V[:, -1:] * alpha * bb
        return np.hstack([z, t])

    def inside(level, X, aa, bb):
        g = seq.ball_norm(level, X[:, :-1])
        return bool(np.all(g <= aa * (1 + tol)) and np.all(np.abs(X[:, -1]) <= seq.alpha[level] * bb * (1 + tol)))

    outer = verts(inv_prev, seq.alpha[i - 1], a, b) @ Linv.T
    inner = verts(inv_cur, seq.alpha[i], a / lam, b) @ seq.Lt[i].T
    return inside(i, outer, lam * a, b) and inside(i - 1, inner, a, b)


def _tau_prime(seq: NormalizedSeq, i: int, lam: float) -> float:
    """``tau'_i = (1 - 1/lam) / ||A_i^{-1} b_i||_{*i}``, validated on vertices and halved until it passes.

    The slice of ``L~_i^{-1}(C_{i-1} x [-tau, tau])`` at height ``s`` is
    ``C_i`` translated by ``-s A_i^{-1} b_i``; both inclusions hold once the
    translation has gauge at most ``1 - 1/lam``.
    """
    if seq.d == 1:
        return math.inf
    shift = np.linalg.solve(seq.A[i], seq.b[i])
    s = float(np.abs(seq.Minv[i] @ shift).max())
    if s == 0:
        return math.inf
    tp = (1 - 1 / lam) / s
    for _ in range(200):
        if verify_sandwich(seq, i, lam, 1.0, 0.999 * tp / seq.alpha[i]):
            return tp
        tp /= 2
    raise ArithmeticError(f"sandwich validation failed at level {i}")


def compute_tau0(seq: NormalizedSeq, lam, default: float = 1.0) -> tuple[float, dict]:
    """``tau_0 = lam^{-2n} min_i min(tau*_i, tau'_i)/alpha_i`` with a breakdown of the minimum."""
    lamf = float(as_scalar(lam))
    if seq.d == 1:
        return default, {"d1": True}
    tstar = [math.inf] + [1.0 / seq.comparison_constant(i) for i in range(1, seq.n + 1)]
    tprime = [math.inf] + [_tau_prime(seq, i, lamf) for i in range(1, seq.n + 1)]
    m = min(min(tstar[i], tprime[i]) / seq.alpha[i] for i in range(1, seq.n + 1))
    tau0 = lamf ** (-2 * seq.n) * m
    return tau0, {"tau_star": tstar[1:], "tau_prime": tprime[1:]}


# ---------------------------------------------------------------------------
# plan and compressors
# ---------------------------------------------------------------------------


@dataclass
class SlicingPlan:
    eps: Fraction
    delta: Fraction
    kappa: Fraction
    k: int
    lam: Fraction
    n: int
    tau0: float
    tau: float
    seq: NormalizedSeq
    details: dict = field(default_factory=dict)

    @property
    def lam_n(self) -> float:
        return float(self.lam) ** self.n

    def inequalities(self) -> dict[str, bool]:
        eps, delta, kappa = self.eps, self.delta, self.kappa
        return {
            "(1-kappa)(1+2/delta) < eps": (1 - kappa) * (1 + 2 / delta) < eps,
            "kappa^k < delta/(1-delta)": kappa**self.k < delta / (1 - delta),
            "lambda^(3n) < (1-delta/2)/(1-delta)": self.lam ** (3 * self.n) < (1 - delta / 2) / (1 - delta),
            "0 < tau < tau0": 0 < self.tau < self.tau0,
        }

    def to_json(self) -> dict:
        return {
            "eps": scalar_str(self.eps),
            "delta": scalar_str(self.delta),
            "kappa": scalar_str(self.kappa),
            "k": self.k,
            "lambda": scalar_str(self.lam),
            "n": self.n,
            "tau0": self.tau0,
            "tau": self.tau,
            "inequalities": self.inequalities(),
            "sequence": self.seq.to_json(),
        }


def make_plan(L: Sequence, eps, delta, tau: float | None = None, lam=None) -> SlicingPlan:
    """Parameter calculus for a concrete sequence; ``tau`` defaults to ``tau0/2``."""
    eps, delta = as_scalar(eps), as_scalar(delta)
    kappa = compute_kappa(eps, delta)
    k = compute_k(eps, delta)
    seq = normalize_sequence(L)
    if seq.n < k:
        raise ValueError(f"sequence length {seq.n} is below k = {k}")
    lam = choose_lambda(delta, seq.n) if lam is None else as_scalar(lam)
    tau0, details = compute_tau0(seq, lam)
    if tau is None:
        tau = tau0 / 2
    if not 0 < tau < tau0:
        raise ValueError(f"tau must lie in (0, tau0) = (0, {tau0:g})")
    return SlicingPlan(eps, delta, kappa, k, lam, seq.n, tau0, tau, seq, details)


def _rho(x: np.ndarray, width: float) -> np.ndarray:
    s = np.clip((1.0 - np.abs(x)) / width, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def _drho(x: np.ndarray, width: float) -> np.ndarray:
    s = np.clip((1.0 - np.abs(x)) / width, 0.0, 1.0)
    return -np.sign(x) * 6.0 * s * (1.0 - s) / width


@dataclass(frozen=True)
class Compressor:
    """``H(z, t) = (z, [1 - (1-kappa) rho(t/(alpha tau)) rho(lam^n ||z||_*)] t)`` in the level frame.

    The bump ``rho`` has transition width ``delta/2``, so the inner region
    (where ``H`` multiplies ``t`` by exactly ``kappa``) is the support scaled
    by ``1 - delta/2``.
    """

    i: int
    Minv: np.ndarray
    alpha: float
    kappa: float
    lam_n: float
    tau: float
    width: float  # bump transition width (delta/2)

    def key(self) -> tuple:
        return (self.i, self.Minv.tobytes(), self.alpha, self.kappa, self.lam_n, self.tau, self.width)


def build_compressor(i: int, seq: NormalizedSeq, plan: SlicingPlan) -> Compressor:
    if not 1 <= i <= seq.n:
        raise IndexError("compressor index out of range")
    return Compressor(i, seq.Minv[i], seq.alpha[i], float(plan.kappa), plan.lam_n, plan.tau, float(plan.delta) / 2)


def _gauge(c: Compressor, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if z.shape[1] == 0:
        return np.zeros(z.shape[0]), np.zeros_like(z)
    w = z @ c.Minv.T
    j = np.abs(w).argmax(axis=1)
    g = np.abs(w[np.arange(len(w)), j])
    grad = np.sign(w[np.arange(len(w)), j])[:, None] * c.Minv[j]
    return g, grad


def evaluate_H(c: Compressor, x) -> np.ndarray:
    """Apply ``H`` to one point or an ``(N, d)`` array; points off the support are returned unchanged."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    g, _ = _gauge(c, X[:, :-1])
    t = X[:, -1]
    factor = 1.0 - (1.0 - c.kappa) * _rho(t / (c.alpha * c.tau), c.width) * _rho(c.lam_n * g, c.width)
    out = X.copy()
    out[:, -1] = factor * t
    return out if np.ndim(x) == 2 else out[0]


def jacobian_H(c: Compressor, x) -> np.ndarray:
    """Closed-form Jacobian(s); shape ``(d, d)`` or ``(N, d, d)``."""
    X = np.atleast_2d(np.asarray(x, dtype=float))
    N, d = X.shape
    g, grad = _gauge(c, X[:, :-1])
    t = X[:, -1]
    s = t / (c.alpha * c.tau)
    rs, rz = _rho(s, c.width), _rho(c.lam_n * g, c.width)
    J = np.broadcast_to(np.eye(d), (N, d, d)).copy()
    J[:, -1, -1] = 1.0 - (1.0 - c.kappa) * rz * (rs + _drho(s, c.width) * s)
    if d > 1:
        J[:, -1, :-1] = (-(1.0 - c.kappa) * t * rs * _drho(c.lam_n * g, c.width) * c.lam_n)[:, None] * grad
    return J if np.ndim(x) == 2 else J[0]


def _support_samples(c: Compressor, d: int, count: int, scale: float, seed: int) -> np.ndarray:
    """Quasi-random points of ``scale`` times the support box ``B_i[lam^-n, tau]`` (level frame)."""
    m = max(1, int(math.ceil(math.log2(max(count, 2)))))
    U = qmc.Sobol(d, scramble=True, seed=seed).random_base2(m)[:count] * 2 - 1
    z = (U[:, :-1] * scale / c.lam_n) @ np.linalg.inv(c.Minv).T if d > 1 else U[:, :0]
    t = U[:, -1:] * scale * c.alpha * c.tau
    return np.hstack([z, t])


def check_jacobian_near_id(c: Compressor, samples: int | np.ndarray = 10_000, d: int | None = None,
                           seed: int = 0, fd_points: int = 200) -> dict:
    """Largest operator-norm deviation ``||DH - I||_2`` over samples, with a finite-difference cross-check."""
    if isinstance(samples, (int, np.integer)):
        d = d if d is not None else c.Minv.shape[0] + 1
        X = _support_samples(c, d, int(samples), 1.05, seed)
    else:
        X = np.asarray(samples, dtype=float)
        d = X.shape[1]
    J = jacobian_H(c, X)
    dev = np.linalg.norm(J - np.eye(d), ord=2, axis=(1, 2))
    worst = int(dev.argmax())
    # central differences on a subset, steps scaled to the support
    scales = np.concatenate([np.full(d - 1, 1.0 / (c.lam_n * max(np.abs(c.Minv).max(), 1e-300))), [c.alpha * c.tau]]) \
        if d > 1 else np.array([c.alpha * c.tau])
    fd_err = 0.0
    for x in X[:: max(1, len(X) // fd_points)]:
        Jfd = np.empty((d, d))
        for j in range(d):
            h = 1e-6 * scales[j]
            e = np.zeros(d)
            e[j] = h
            Jfd[:, j] = (evaluate_H(c, x + e) - evaluate_H(c, x - e)) / (2 * h)
        fd_err = max(fd_err, float(np.abs(Jfd - jacobian_H(c, x)).max()))
    return {"max_deviation": float(dev[worst]), "witness": X[worst].tolist(), "fd_discrepancy": fd_err,
            "samples": len(X)}


def check_identity_outside(c: Compressor, samples: int = 1000, d: int | None = None, seed: int = 0) -> dict:
    """Sample points off the support and confirm ``H(x) == x`` bit for bit."""
    d = d if d is not None else c.Minv.shape[0] + 1
    pts = []
    s = seed
    while sum(len(p) for p in pts) < samples:
        X = _support_samples(c, d, 4 * samples, 3.0, s)
        g, _ = _gauge(c, X[:, :-1])
        off = (c.lam_n * g >= 1) | (np.abs(X[:, -1]) >= c.alpha * c.tau)
        pts.append(X[off])
        s += 1
    X = np.vstack(pts)[:samples]
    Y = evaluate_H(c, X)
    bad = np.flatnonzero(np.any(Y != X, axis=1))
    return {"samples": len(X), "violations": int(bad.size), "witness": X[bad[0]].tolist() if bad.size else None}


# ---------------------------------------------------------------------------
# shrink inclusion
# ---------------------------------------------------------------------------


@dataclass
class ShrinkVerdict:
    i: int
    k: int
    passed: bool
    margin: float  # min over points of the relative distance to the boundary of W_{i-k}
    points: int
    witness: list | None = None
    orbit: list | None = None

    def to_json(self) -> dict:
        return {"i": self.i, "k": self.k, "passed": self.passed, "margin": self.margin, "points": self.points,
                "witness": self.witness, "orbit": self.orbit}


def _push(seq: NormalizedSeq, plan: SlicingPlan, comps: dict[int, Compressor], i: int, Y: np.ndarray,
          record: bool = False):
    """Carry base-coordinate points through ``H_i, ..., H_{i-k+1}`` (the linear maps act trivially)."""
    orbit = [Y.copy()] if record else None
    for j in range(i, i - plan.k, -1):
        c = comps[j]
        t = Y[:, -1] / seq.gamma[j]
        z = Y[:, :-1] - np.outer(t, seq.p[j])  # = M_j^{-1} z_j, so the gauge is its sup norm
        g = np.abs(z).max(axis=1) if seq.d > 1 else np.zeros(len(Y))
        factor = 1.0 - (1.0 - c.kappa) * _rho(t / (c.alpha * c.tau), c.width) * _rho(c.lam_n * g, c.width)
        dt = (factor - 1.0) * t
        Y = Y.copy()
        Y[:, -1] += dt * seq.gamma[j]
        if seq.d > 1:
            Y[:, :-1] += np.outer(dt, seq.p[j])
        if record:
            orbit.append(Y.copy())
    return Y, orbit


def verify_shrink(seq: NormalizedSeq, plan: SlicingPlan, tau: float | None = None, i: int | None = None,
                  samples: int = 10_000, seed: int = 0) -> ShrinkVerdict:
    """Check ``L_{i-k+1} H_{i-k+1} ... L_i H_i (V_i) ⊂ W_{i-k}`` on samples plus extreme points of ``V_i``."""
    tau = plan.tau if tau is None else tau
    if not 0 < tau < plan.tau0:
        raise ValueError(f"tau = {tau:g} violates 0 < tau < tau0 = {plan.tau0:g}")
    if i is None or not plan.k <= i <= seq.n:
        raise ValueError(f"index must satisfy k <= i <= n ({plan.k} <= {i} <= {seq.n})")
    if tau != plan.tau:
        plan = SlicingPlan(plan.eps, plan.delta, plan.kappa, plan.k, plan.lam, plan.n, plan.tau0, tau, seq,
                           plan.details)
    d = seq.d
    comps = {j: build_compressor(j, seq, plan) for j in range(i - plan.k + 1, i + 1)}
    delta = float(plan.delta)
    half = np.concatenate([np.full(d - 1, 1 - delta), [(1 - delta) * tau]])
    m = max(1, int(math.ceil(math.log2(max(samples, 2)))))
    U = qmc.Sobol(d, scramble=True, seed=seed).random_base2(m)[:samples] * 2 - 1
    extreme = [np.array(v) for v in itertools.product((-1.0, 1.0), repeat=d)]
    for j in range(d):
        for s in (-1.0, 1.0):
            e = np.zeros(d)
            e[j] = s
            extreme.append(e)
    Y0 = np.vstack([U, np.array(extreme)]) * half
    Y, _ = _push(seq, plan, comps, i, Y0)
    zm = 1.0 - np.abs(Y[:, :-1]).max(axis=1) if d > 1 else np.ones(len(Y))
    tm = 1.0 - np.abs(Y[:, -1]) / (delta * tau)
    margins = np.minimum(zm, tm)
    worst = int(margins.argmin())
    passed = bool(margins[worst] > 0)
    verdict = ShrinkVerdict(i, plan.k, passed, float(margins[worst]), len(Y0))
    if not passed:
        _, orbit = _push(seq, plan, comps, i, Y0[worst:worst + 1], record=True)
        verdict.witness = Y0[worst].tolist()
        verdict.orbit = [o[0].tolist() for o in orbit]
    return verdict
