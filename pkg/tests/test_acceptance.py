"""Acceptance criteria 1–7, one PASS/FAIL line each (also shown in the terminal summary).

Criteria are checked exactly as stated; a red criterion is a finding, not a
test to be tuned.  Each test asserts the criterion after recording its line.
"""

from __future__ import annotations

import random
import time
from fractions import Fraction

import numpy as np
import pytest
from gmpy2 import mpq

from noacim import escape, linearize, pipeline, rokhlin, slicing
from noacim.geometry import IntervalSet
from noacim.maps import doubling, half_contraction, identity, surrogate, tripling

from conftest import record


def verdict(n: int, ok: bool, detail: str) -> None:
    record(f"criterion {n}: {'PASS' if ok else 'FAIL'} — {detail}")


@pytest.fixture(scope="module")
def pipeline_report():
    cfg = pipeline.PipelineConfig(eps=Fraction(1, 10), k=1)
    t0 = time.perf_counter()
    report = pipeline.run(doubling(), config=cfg)
    return report, time.perf_counter() - t0


def test_criterion_1_rokhlin_tower():
    f = doubling()
    eps0 = Fraction(1, 10)
    cfg = rokhlin.TowerConfig(n0=4, l=1, eps0=eps0, T=20, cap=200_000, adaptive_depth=True)
    t0 = time.perf_counter()
    tower = rokhlin.build_tower(f, 4, 1, eps0, 20, config=cfg)
    seconds = time.perf_counter() - t0
    a = tower.disjoint and len(tower.levels) == 4
    b = tower.coverage > Fraction(9, 10)
    c = tower.U.measure() < Fraction(1, 4) + eps0
    fast = seconds < 10
    ok = a and b and c and fast
    verdict(1, ok, f"disjoint={a} coverage={float(tower.coverage):.4f}>0.9:{b} "
                   f"m(U)={float(tower.U.measure()):.4f}<0.35:{c} effective T={tower.T} time={seconds:.1f}s")
    assert ok


def _random_good(f, N, rng, base):
    while True:
        comps = []
        for _ in range(rng.randint(1, 3)):
            a = rng.randrange(base)
            comps.append((mpq(a, base), mpq(min(a + rng.randint(1, 3), base), base)))
        good = rokhlin.is_n_good(f, IntervalSet(comps), N)
        if good:
            return good


def test_criterion_2_merge_property_suite():
    rng = random.Random(2)
    failures, worst = 0, Fraction(0)
    for trial in range(100):
        f, base = (doubling(), 64) if trial % 2 == 0 else (tripling(), 81)
        N = rng.randint(2, 4)
        A, B = _random_good(f, N, rng, base), _random_good(f, N, rng, base)
        merged = rokhlin.merge_good(f, A, B, N - 1, check_depth=12)
        good = rokhlin.is_n_good(f, merged.C.Z, N)
        failures += not (good and merged.missing <= Fraction(1, 10_000))
        worst = max(worst, merged.missing)
    ok = failures == 0
    verdict(2, ok, f"100 merges, failures={failures}, worst depth-12 tail={float(worst):.2e}")
    assert ok


def test_criterion_3_compressors():
    eps, delta = Fraction(3, 10), Fraction(2, 5)
    k = slicing.compute_k(eps, delta)
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    jac_bad = id_bad = shrink_bad = 0
    worst_dev, min_margin, ineq_ok = 0.0, np.inf, True
    for s in range(50):
        n = int(rng.integers(k, k + 6))
        plan = slicing.make_plan(slicing.random_sequence(rng, 2, n), eps, delta)
        ineq_ok &= all(plan.inequalities().values())
        for i in range(1, n + 1):
            c = slicing.build_compressor(i, plan.seq, plan)
            jr = slicing.check_jacobian_near_id(c, samples=10_000, d=2, seed=s * 100 + i, fd_points=20)
            worst_dev = max(worst_dev, jr["max_deviation"])
            jac_bad += jr["max_deviation"] >= float(eps)
            id_bad += slicing.check_identity_outside(c, samples=1000, d=2, seed=s * 100 + i)["violations"]
        for i in range(k, n + 1):
            v = slicing.verify_shrink(plan.seq, plan, i=i, samples=10_000, seed=s)
            shrink_bad += not (v.passed and v.margin > 0)
            min_margin = min(min_margin, v.margin)
    seconds = time.perf_counter() - t0
    ok = k == 17 and ineq_ok and jac_bad == 0 and id_bad == 0 and shrink_bad == 0 and seconds < 300
    verdict(3, ok, f"k={k} max|DH-I|={worst_dev:.3f} identity violations={id_bad} shrink failures={shrink_bad} "
                   f"min margin={min_margin:.4f} time={seconds:.0f}s")
    assert ok


def test_criterion_4_linearization():
    f = surrogate()
    U = IntervalSet([(0, 1)])
    gamma = Fraction(1, 5)
    r0 = Fraction(1, 1000)
    results = [linearize.linearize_on(f, U, gamma, r0 / 2**j) for j in range(4)]
    ratio_ok = results[0].ratio > Fraction(4, 5)
    local_ok = linearize.check_locally_linear(results[0].f_tilde, results[0].V)
    bounds = [r.c1_bound for r in results]
    small = bounds[0] < Fraction(1, 10)
    mono = all(b < a for a, b in zip(bounds, bounds[1:]))
    ok = ratio_ok and local_ok and small and mono
    verdict(4, ok, f"m(V)/m(U)={float(results[0].ratio):.5f} locally linear={local_ok} "
                   f"C1 bounds={[round(float(b), 5) for b in bounds]}")
    assert ok


def test_criterion_5_end_to_end(pipeline_report):
    report, seconds = pipeline_report
    d = report.decomposition
    eps = Fraction(1, 10)
    m_K, m_img = report.verdict.m_K, report.verdict.m_image
    parts = d["I"] < eps and d["II"] < eps and d["III"] <= eps and d["IV"] < eps
    c1 = report.c1["f_to_g"] < report.c1["budget"]
    ok = m_K > Fraction(3, 5) and m_img < eps and parts and c1 and seconds < 300
    verdict(5, ok, f"m(K)={float(m_K):.6f}>0.6 m(g^k K)={float(m_img):.2e}<0.1 "
                   f"I..IV={[round(float(d[x]), 6) for x in ('I', 'II', 'III', 'IV')]} "
                   f"C1={float(report.c1['f_to_g']):.3g} vs budget {float(report.c1['budget']):.3g} "
                   f"(k={report.params['k']} {report.params['k_source']}) time={seconds:.0f}s")
    assert ok


def test_criterion_6_oracle(pipeline_report):
    report, _ = pipeline_report
    G = 2**16
    grid = escape.grid_image_measure(report.g, report.K, report.certificate.N, G)
    agree = abs(grid - float(report.verdict.m_image)) <= 1e-3
    f_avg = escape.kb_average(doubling(), 64, G)
    l1 = float(np.abs(f_avg.density * G - 1.0).sum() / G)
    uniform = l1 <= 1e-2
    g_avg = escape.kb_average(report.g, 64, G)
    cf, cg = escape.concentration_statistic(f_avg, 0.5), escape.concentration_statistic(g_avg, 0.5)
    ok = agree and uniform and cg < cf
    verdict(6, ok, f"grid m(g^k K)={grid:.5f} vs exact {float(report.verdict.m_image):.2e} (agree={agree}) "
                   f"L1(f)={l1:.2e} concentration f={cf:.5f} g={cg:.5f}")
    assert ok


def test_criterion_7_negative_controls():
    eps = Fraction(1, 10)
    K = IntervalSet([(Fraction(1, 10), 1)])
    rejected = []
    for N in (0, 1, 3, 7):
        v = escape.verify_certificate(identity(), escape.EscapeCertificate(K, N, eps))
        rejected.append(not v.passed and any(line.endswith("FAIL") for line in v.lines))
    # certificates whose inequalities fail: K too small, image too large
    small = escape.verify_certificate(half_contraction(), escape.EscapeCertificate(IntervalSet([(0, Fraction(1, 2))]), 5, eps))
    rejected.append(not small.passed and small.lines[0].endswith("FAIL"))
    expand = escape.verify_certificate(doubling(), escape.EscapeCertificate(K, 2, eps))
    rejected.append(not expand.passed and expand.lines[1].endswith("FAIL"))
    # a passing control so the rejections are not vacuous
    good = escape.search_certificate(half_contraction(), eps, 8)
    control = good is not None and escape.verify_certificate(half_contraction(), good).passed
    ok = all(rejected) and control
    verdict(7, ok, f"rejected {sum(rejected)}/{len(rejected)} bad certificates with FAIL lines; "
                   f"positive control passes={control}")
    assert ok
