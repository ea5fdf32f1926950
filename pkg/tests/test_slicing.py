from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noacim import slicing


def test_parameter_calculus():
    assert slicing.compute_kappa(Fraction(1, 2), Fraction(1, 2)) == Fraction(19, 20)
    assert slicing.compute_kappa(Fraction(3, 10), Fraction(2, 5)) == Fraction(39, 40)
    assert slicing.compute_k(Fraction(3, 10), Fraction(2, 5)) == 17


@given(st.integers(1, 9), st.integers(1, 9))
def test_kappa_inequalities(e, dl):
    eps, delta = Fraction(e, 10), Fraction(dl, 10)
    kappa = slicing.compute_kappa(eps, delta)
    k = slicing.compute_k(eps, delta)
    assert 0 < kappa < 1
    assert kappa**k < delta / (1 - delta)
    if 1 - eps / (1 + 2 / delta) > 0:
        assert (1 - kappa) * (1 + 2 / delta) < eps
    assert k == 1 or not kappa ** (k - 1) < delta / (1 - delta)


@given(st.integers(1, 9), st.integers(1, 200))
def test_lambda_is_exactly_admissible(dl, n):
    delta = Fraction(dl, 10)
    lam = slicing.choose_lambda(delta, n)
    assert lam > 1 and lam ** (3 * n) < (1 - delta / 2) / (1 - delta)


def test_parse_sequence_rejects_singular():
    with pytest.raises(ValueError):
        slicing.parse_sequence([[["1", "2"], ["2", "4"]]])
    assert slicing.exact_det([[Fraction(1, 2), 1], [0, 2]]) == 1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 3))
def test_normalized_maps_preserve_hyperplane(seed, d):
    rng = np.random.default_rng(seed)
    seq = slicing.normalize_sequence(slicing.random_sequence(rng, d, 5))
    assert seq.residual < 1e-9
    for i in range(1, seq.n + 1):
        assert np.allclose(seq.Lt[i][-1, :-1], 0.0)
        assert seq.comparison_constant(i) > 0


def plan_for(seed, d=2, n=None):
    rng = np.random.default_rng(seed)
    k = slicing.compute_k(Fraction(3, 10), Fraction(2, 5))
    return slicing.make_plan(slicing.random_sequence(rng, d, n or k + 1), Fraction(3, 10), Fraction(2, 5))


def test_plan_inequalities_hold():
    plan = plan_for(1)
    assert all(plan.inequalities().values())
    assert 0 < plan.tau < plan.tau0


def test_compressor_identity_outside_and_near_id():
    plan = plan_for(2)
    c = slicing.build_compressor(3, plan.seq, plan)
    assert slicing.check_identity_outside(c, samples=500, d=2)["violations"] == 0
    res = slicing.check_jacobian_near_id(c, samples=2000, d=2, fd_points=20)
    assert res["max_deviation"] < 0.3
    assert res["fd_discrepancy"] < 1e-4
    x = np.array([0.0, 0.5 * c.alpha * c.tau])
    assert slicing.evaluate_H(c, x)[1] == pytest.approx(c.kappa * x[1])


@pytest.mark.parametrize("d", [1, 2, 3])
def test_shrink_holds_in_each_dimension(d):
    plan = plan_for(5, d=d)
    for i in range(plan.k, plan.n + 1):
        v = slicing.verify_shrink(plan.seq, plan, i=i, samples=512)
        assert v.passed and v.margin > 0


def test_shrink_rejects_bad_arguments():
    plan = plan_for(7)
    with pytest.raises(ValueError):
        slicing.verify_shrink(plan.seq, plan, i=plan.k - 1)
    with pytest.raises(ValueError):
        slicing.verify_shrink(plan.seq, plan, tau=2 * plan.tau0, i=plan.k)


def test_shrink_fails_with_witness_when_k_is_too_small():
    plan = plan_for(9)
    weak = slicing.SlicingPlan(plan.eps, plan.delta, plan.kappa, 1, plan.lam, plan.n, plan.tau0, plan.tau,
                               plan.seq, plan.details)
    v = slicing.verify_shrink(plan.seq, weak, i=plan.n, samples=256)
    assert not v.passed and v.witness is not None and v.orbit
