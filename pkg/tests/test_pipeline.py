import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from noacim import pipeline
from noacim.maps import doubling, identity, surrogate


@given(st.integers(2, 99))
def test_default_delta(q):
    eps = Fraction(1, q)
    d = pipeline.default_delta(eps)
    assert d < eps <= 2 * d
    assert d.denominator & (d.denominator - 1) == 0


@given(st.integers(1, 6), st.integers(1, 12))
def test_kappa_for_k(m, k):
    delta = Fraction(1, 2**m)
    kappa = pipeline.kappa_for_k(delta, k)
    assert 0 < kappa < 1 and kappa**k < delta / (1 - delta)


SMALL = dict(eps=Fraction(1, 2), k=1, max_components=8)


@pytest.fixture(scope="module")
def small_report():
    return pipeline.run(doubling(), config=pipeline.PipelineConfig(**SMALL))


def test_report_structure(small_report):
    r = small_report
    assert r.params["n"] == 2 and r.params["k_source"] == "override"
    assert r.checks["I..IV partition the complement of K"]
    assert r.checks["step2"]
    assert all(line.endswith(("PASS", "FAIL")) for line in r.lines)
    assert r.passed == all(r.checks.values())
    total = sum(r.decomposition.values()) + r.K.measure()
    assert total == 1


def test_compressors_sit_on_levels(small_report):
    r = small_report
    tree = r.tree
    assert len(r.g.patches) == sum(len(c) for c in tree.centers[1:])
    for i in range(1, r.params["n"] + 1):
        assert tree.level_set(i).is_subset(r.step1.Q[i])


def test_c1_ledger_composes(small_report):
    c1 = small_report.c1
    assert c1["f_to_g"] <= c1["f_to_f_tilde"] + c1["f_tilde_to_g"]


def test_deterministic(small_report):
    again = pipeline.run(doubling(), config=pipeline.PipelineConfig(**SMALL))
    a, b = small_report.to_json(), again.to_json()
    a.pop("seconds"), b.pop("seconds")
    a["step1"]["tower"]["diagnostics"].pop("seconds", None)
    b["step1"]["tower"]["diagnostics"].pop("seconds", None)
    assert json.dumps(a, sort_keys=True, default=str) == json.dumps(b, sort_keys=True, default=str)


def test_weak_compressor_is_caught():
    cfg = pipeline.PipelineConfig(**SMALL)
    tl = pipeline.step1(doubling(), cfg.eps, cfg)
    tl.kappa = Fraction(9, 10)  # kappa^k no longer below delta/(1-delta)
    _, tree = pipeline.step2(tl, cfg.eps, tl.delta, cfg)
    assert not tree.checks["g^k V_i(ybar) inside W_(i-k)(ybar)"]
    assert tree.shrink_failures and "image" in tree.shrink_failures[0]


def test_rejects_unsuitable_maps():
    with pytest.raises(ValueError):
        pipeline.step1(identity(), Fraction(1, 2))
    with pytest.raises(ValueError):
        pipeline.step1(surrogate(), Fraction(1, 2))
    with pytest.raises(ValueError):
        pipeline.PipelineConfig(eps=Fraction(3, 2))
