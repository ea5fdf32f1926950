from fractions import Fraction

import numpy as np
import pytest

from noacim import escape
from noacim.geometry import IntervalSet
from noacim.maps import Bump, CompressorPatch, PatchedMap, doubling, half_contraction, identity, surrogate


def test_image_mode():
    assert escape.image_mode(doubling()) == "exact"
    assert escape.image_mode(surrogate()) == "enclosure"
    p = CompressorPatch(Fraction(1, 4), Fraction(1, 16), Fraction(1, 2), Bump(Fraction(1, 4)), Fraction(2))
    assert escape.image_mode(PatchedMap(doubling(), [p])) == "exact"


def test_contraction_certificate_passes_and_identity_fails():
    eps = Fraction(1, 10)
    cert = escape.search_certificate(half_contraction(), eps, 8)
    assert cert is not None
    v = escape.verify_certificate(half_contraction(), cert)
    assert v.passed and v.m_K > 1 - eps and v.m_image < eps
    bad = escape.verify_certificate(identity(), escape.EscapeCertificate(IntervalSet([(Fraction(1, 10), 1)]), 3, eps))
    assert not bad.passed and bad.lines[1].endswith("FAIL") and bad.gap == Fraction(8, 10)


def test_search_finds_nothing_for_doubling():
    assert escape.search_certificate(doubling(), Fraction(1, 10), 3, cells=64) is None


def test_verify_rejects_bad_input():
    with pytest.raises(ValueError):
        escape.verify_certificate(doubling(), escape.EscapeCertificate(IntervalSet([(0, 2)]), 1, Fraction(1, 10)))


@pytest.mark.parametrize("N", [0, 1, 3])
def test_grid_image_measure_brackets_exact(N):
    f = half_contraction()
    K = IntervalSet([(Fraction(1, 10), Fraction(7, 10))])
    exact = float(f.image(K).measure()) if N == 1 else float(
        (K if N == 0 else f.image(f.image(f.image(K)))).measure())
    G = 4096
    grid = escape.grid_image_measure(f, K, N, G)
    assert exact <= grid + 1e-12 <= exact + 2 * len(K) / G + 1e-9


def test_kb_average_doubling_is_uniform():
    a = escape.kb_average(doubling(), 16, 1024)
    assert np.abs(a.density * 1024 - 1).sum() / 1024 < 1e-2
    assert escape.concentration_statistic(a, 0.5) == pytest.approx(0.5, abs=1e-3)
    assert max(a.mass_errors) < 1e-12


def test_contraction_concentrates():
    a5 = escape.kb_average(half_contraction(), 5, 1024)
    a40 = escape.kb_average(half_contraction(), 40, 1024)
    assert escape.concentration_statistic(a40, 0.9) < escape.concentration_statistic(a5, 0.9)
    with pytest.raises(ValueError):
        escape.concentration_statistic(a5, 1.5)


def test_csv_outputs(tmp_path):
    a = escape.kb_average(doubling(), 4, 64)
    escape.write_density_csv(a, tmp_path / "d.csv")
    escape.write_profile_csv(a, tmp_path / "p.csv")
    assert len((tmp_path / "d.csv").read_text().splitlines()) == 65
    assert (tmp_path / "p.csv").read_text().startswith("q,cells,measure")
