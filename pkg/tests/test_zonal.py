import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmbounds import zonal


def test_norm_small_cases():
    assert zonal.zonal_norm_exact(0) == pytest.approx(math.log(4 * math.pi), abs=1e-15)
    assert zonal.zonal_norm_exact(1) == pytest.approx(math.log(8 * math.pi / 3), abs=1e-15)
    assert zonal.zonal_norm_quadrature(1) == pytest.approx(math.log(8 * math.pi / 3), abs=1e-10)


def test_norm_matches_quadrature():
    for n in range(61):
        a, b = zonal.zonal_norm_exact(n), zonal.zonal_norm_quadrature(n)
        assert abs(a - b) <= 1e-9 * max(1.0, abs(a))
    assert zonal.zonal_norm_exact(30) == pytest.approx(zonal.zonal_norm_quadrature(30), abs=1e-10)


def test_mode_and_h():
    m = zonal.zonal_mode(3)
    assert m.eigenvalue == 12 and m.h == pytest.approx(1 / math.sqrt(12))


def test_asymptotic_ratio():
    r1 = math.exp(zonal.zonal_norm_exact(1)) / zonal.zonal_asymptotic(1)
    assert zonal.zonal_asymptotic(1) == pytest.approx(4 * math.pi ** 1.5 / 3)
    assert r1 == pytest.approx(1.128, abs=1e-3)
    ratios = [math.exp(zonal.zonal_norm_exact(n)) / zonal.zonal_asymptotic(n) for n in range(1, 101)]
    assert abs(ratios[29] - 1) <= 0.01
    assert all(b < a for a, b in zip(ratios, ratios[1:])) and ratios[-1] > 1


def test_cap_mass_examples():
    assert zonal.cap_mass(0, math.sin(0.5)) == pytest.approx(math.log(4 * math.pi * (1 - math.cos(0.5))),
                                                               abs=1e-12)
    assert zonal.cap_mass(7, 1 - 1e-12) == pytest.approx(zonal.zonal_norm_exact(7), abs=1e-5)
    n = 20
    rel = zonal.cap_mass(n, math.exp(-1)) - zonal.zonal_norm_exact(n)
    assert rel <= -2 * n + 2 * math.log(n)


@given(st.integers(0, 60), st.floats(0.05, 0.9))
def test_cap_mass_monotone(n, s0):
    assert zonal.cap_mass(n + 1, s0) < zonal.cap_mass(n, s0)
    assert zonal.cap_mass(n, s0) < zonal.cap_mass(n, min(0.99, s0 + 0.05))


def test_finite_for_large_n():
    for n in (100, 150, 200):
        assert math.isfinite(zonal.zonal_norm_exact(n))
        assert math.isfinite(zonal.cap_mass(n, math.exp(-1)))
        assert math.isfinite(zonal.zonal_norm_quadrature(n))


def test_rate_fits():
    ns = [5, 10, 15, 20, 25, 30]
    f1 = zonal.zonal_rate_check(ns, math.exp(-1))
    f2 = zonal.zonal_rate_check(ns, math.exp(-2))
    assert 0.85 <= f1.alpha <= 1.15
    assert 2 * 0.85 <= f2.alpha <= 2 * 1.15
    assert not f1.concave and not f2.concave
    with pytest.raises(ValueError):
        zonal.zonal_rate_check([5, 10, 15], math.exp(-1))


def test_eigen_relation():
    assert zonal.verify_eigen_relation(0) == 0.0
    assert zonal.verify_eigen_relation(1, 100) <= 1e-12
    assert zonal.verify_eigen_relation(25, 100) <= 1e-9
