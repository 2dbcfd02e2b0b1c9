import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmbounds.carleman import (
    CalibrationError,
    CoordinateSymbol,
    CriticalPointError,
    ImPphi,
    RePphi,
    bracket_closed_form,
    calibrate_gamma,
    carleman_inequality_table,
    certify_weight,
    complex_bracket,
    conjugated_bracket,
    poisson_bracket,
    sample_char_set,
)
from qmbounds.carleman.symbols import weight
from qmbounds.geometry import (
    Constant,
    ConstantMetric,
    ExpField,
    Gaussian,
    Linear,
    Quadratic,
    SumField,
    TrigMetric,
    box,
    build_grid,
    validate_field,
)

G_TRIG = TrigMetric(np.eye(2) * 1.5, [{"freq": [1.0, 0.5], "phase": 0.3, "matrix": [[0.2, 0.1], [0.1, -0.15]]},
                                      {"freq": [-0.7, 1.3], "phase": 1.1, "matrix": [[0.1, -0.05], [-0.05, 0.2]]}])
V_MIX = SumField([Quadratic([[1.0, 0.3], [0.3, 2.0]]), Gaussian([0.2, -0.1], 0.7, 0.5)])
PSI = SumField([Linear([0.8, -0.4], 0.2), Quadratic([[0.3, 0.1], [0.1, -0.2]])])
ZERO2 = Constant(0.0, 2)
UNIT = build_grid("rectangle", [[0, 1], [0, 1]], 21, 1.0)


def _points(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-1, 1, (n, 2)), rng.normal(size=(n, 2))


def test_canonical_pair_and_antisymmetry():
    x, xi = _points(20)
    one = poisson_bracket(CoordinateSymbol("xi", 0, 2), CoordinateSymbol("x", 0, 2), x, xi)
    assert np.all(one == 1.0)
    phi = weight(PSI, 1.1)
    re = RePphi(G_TRIG, V_MIX, phi)
    assert np.max(np.abs(poisson_bracket(re, re, x, xi))) <= 1e-12


def test_hand_expansion_at_origin():
    phi = ExpField(Linear([1.0, 0.0]), 1.0)
    x = np.zeros((3, 2))
    xi = np.array([[0.0, 0.5], [0.0, -2.0], [0.0, 0.0]])
    assert np.allclose(conjugated_bracket(None, ZERO2, phi, x, xi), 4.0, atol=1e-13)


def test_closed_form_matches_generic_bracket():
    x, xi = _points(200)
    for gamma in (0.7, 1.3, 2.5):
        phi = weight(PSI, gamma)
        generic = poisson_bracket(RePphi(G_TRIG, V_MIX, phi), ImPphi(G_TRIG, V_MIX, phi), x, xi)
        closed = bracket_closed_form(G_TRIG, V_MIX, PSI, gamma, x, xi)
        assert np.max(np.abs(closed - generic) / np.abs(generic)) <= 1e-8


@given(st.integers(0, 10_000), st.floats(0.3, 3.0))
def test_complex_bracket_is_twice_real_bracket(seed, gamma):
    x, xi = _points(10, seed)
    phi = weight(PSI, gamma)
    two = 2.0 * conjugated_bracket(G_TRIG, V_MIX, phi, x, xi)
    cplx = complex_bracket(G_TRIG, V_MIX, phi, x, xi)
    assert np.max(np.abs(cplx - two) / np.maximum(np.abs(two), 1e-300)) <= 1e-10


def test_weight_field_is_exponential():
    phi = weight(PSI, 1.7)
    x, _ = _points(50)
    assert np.allclose(phi(x), np.exp(1.7 * PSI(x)), rtol=1e-15, atol=0)
    assert validate_field(phi, build_grid("rectangle", [[-1, 1], [-1, 1]], 11, 1.0)).passed


@pytest.mark.parametrize("gamma", [1.0, 2.0, 3.0])
def test_closed_form_on_char_set(gamma):
    phi = weight(Linear([1.0, 0.0]), gamma)
    for x0 in ([0.1, 0.3], [0.7, 0.2]):
        xis = np.array(sample_char_set(None, ZERO2, phi, 0.5, x0, 6, seed=1))
        xs = np.broadcast_to(np.asarray(x0), xis.shape)
        val = bracket_closed_form(None, ZERO2, Linear([1.0, 0.0]), gamma, xs, xis)
        assert np.allclose(val, 4 * gamma ** 4 * math.exp(3 * gamma * x0[0]), rtol=1e-12)


def test_potential_term_vanishes_when_orthogonal():
    x, xi = _points(30)
    psi = Linear([1.0, 0.0])
    V = Quadratic([[0.0, 0.0], [0.0, 1.0]])       # grad V along x_2, G psi' along x_1
    a = bracket_closed_form(None, V, psi, 1.5, x, xi)
    b = bracket_closed_form(None, ZERO2, psi, 1.5, x, xi)
    assert np.allclose(a, b, rtol=1e-13)


@given(st.integers(0, 10_000), st.floats(-1.0, 2.0))
def test_char_set_samples_satisfy_constraints(seed, E):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1, 1, 2)
    phi = weight(PSI, 1.2)
    xis = sample_char_set(G_TRIG, V_MIX, phi, E, x, 8, seed)
    Gx = G_TRIG(x[None])[0]
    dphi = phi.grad(x[None])[0]
    r2 = dphi @ Gx @ dphi + E - V_MIX(x[None])[0]
    if r2 < 0:
        assert xis == []
        return
    for xi in xis:
        assert abs(xi @ Gx @ dphi) <= 1e-12 * max(1.0, np.linalg.norm(Gx @ dphi) * np.linalg.norm(xi))
        assert abs(xi @ Gx @ xi - r2) <= 1e-12 * max(1.0, r2)


def test_char_set_special_cases():
    phi1 = ExpField(Linear([1.0]), 1.0)
    assert sample_char_set(None, Constant(0.0), phi1, 0.5, [0.2], 4) == []
    # r^2 = 0 exactly in 1-D: the fiber is {0}
    x0 = 0.0
    E = -1.0      # phi'^2 = 1 at x = 0
    pts = sample_char_set(None, Constant(0.0), phi1, E, [x0], 4)
    assert len(pts) > 0 and np.all(np.array(pts) == 0.0)
    phi = ExpField(Linear([1.0, 0.0]), 1.0)
    xis = sample_char_set(None, ZERO2, phi, 0.3, [0.0, 0.0], 10, seed=3)
    assert all(abs(v[0]) <= 1e-15 and abs(abs(v[1]) - math.sqrt(1.3)) <= 1e-12 for v in xis)
    assert sample_char_set(None, Constant(100.0, 2), phi, 0.0, [0.0, 0.0], 4) == []
    with pytest.raises(CriticalPointError):
        sample_char_set(None, ZERO2, ExpField(Quadratic(np.eye(2)), 1.0), 0.0, [0.0, 0.0], 4)


@pytest.mark.parametrize("gamma", [1.0, 2.0, 3.0])
def test_certify_closed_form(gamma):
    cert = certify_weight(None, ZERO2, Linear([1.0, 0.0]), gamma, UNIT, None, [0.0, 1.0], xi_samples=4)
    assert cert.c_min == pytest.approx(4 * gamma ** 4, rel=1e-8)
    assert cert.argmin["x"][0] == 0.0


def test_calibration_examples():
    psi = Linear([1.0, 0.0])
    assert calibrate_gamma(None, ZERO2, psi, UNIT, None, [0.0, 1.0], 4.0) == 1.0
    assert calibrate_gamma(None, ZERO2, psi, UNIT, None, [0.0, 1.0], 64.0) == 2.0
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], 11, 1.0)
    with pytest.raises(CriticalPointError):
        calibrate_gamma(None, ZERO2, Quadratic(np.eye(2)), g, None, [0.0, 1.0], 4.0)
    with pytest.raises(CalibrationError):
        calibrate_gamma(None, ZERO2, psi, UNIT, None, [0.0, 1.0], 1e40, max_doublings=3)


def test_certify_critical_point_region_errors():
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], 11, 1.0)
    with pytest.raises(CriticalPointError):
        certify_weight(None, ZERO2, Quadratic(np.eye(2)), 1.0, g, None, [0.0, 1.0])
    inner = box(g, [0.3, 0.3], [0.9, 0.9])
    assert certify_weight(None, ZERO2, Quadratic(np.eye(2)), 1.0, g, inner, [0.0, 1.0]).c_min > 0


def test_certify_monotone_in_gamma():
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], 13, 1.0)
    gammas = (2.0, 4.0, 8.0, 16.0)
    # star weight, region kept a unit gradient away from the maximum at the origin
    region = box(g, [0.5, -0.4], [0.95, 0.4])
    psi = Quadratic(-np.eye(2), None, 3.0)
    c = [certify_weight(None, ZERO2, psi, gam, g, region, [0.0, 1.0]).c_min for gam in gammas]
    assert all(a < b for a, b in zip(c, c[1:]))
    # nonnegative like the built-in families, so e^{3 gamma psi} does not shrink
    c = [certify_weight(G_TRIG, V_MIX, Linear([1.0, 0.2], 1.5), gam, g, None, [0.0, 1.0]).c_min for gam in gammas]
    assert all(a < b for a, b in zip(c, c[1:]))


def test_near_critical_point_needs_larger_gamma():
    """Close to a maximum the gamma^3 curvature terms win until gamma is large."""
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], 13, 1.0)
    region = box(g, [0.2, -0.8], [0.9, 0.8])
    psi = Quadratic(-np.eye(2), None, 3.0)
    c = {gam: certify_weight(None, ZERO2, psi, gam, g, region, [0.0, 1.0]).c_min for gam in (2.0, 4.0, 16.0)}
    assert c[4.0] < c[2.0] < 0 < c[16.0]


def test_one_dimensional_certificate_is_vacuous():
    g = build_grid("interval", [[0, 1]], 101, 1.0)
    cert = certify_weight(None, Constant(0.0), Linear([1.0]), 1.0, g, None, [0.0, 1.0])
    assert math.isinf(cert.c_min) and cert.certified


def test_inequality_table_and_control():
    g = build_grid("interval", [[0, 1]], 2001, 1.0)
    V = Constant(0.0)
    hs = [0.4, 0.2, 0.1, 0.05]
    tab = carleman_inequality_table(g, None, V, weight(Linear([1.0]), 1.0), ["left"], 0.0, hs)
    assert all(m > 0 for m in tab.min_ratio)
    assert tab.slope >= -0.02
    ctl = carleman_inequality_table(g, None, V, Constant(0.0), ["left"], 0.0, hs)
    assert ctl.min_ratio[0] / ctl.min_ratio[-1] >= 10


def test_inequality_rejects_nonvanishing_sample():
    g = build_grid("interval", [[0, 1]], 201, 1.0)
    bad = np.ones(g.n_nodes)
    with pytest.raises(ValueError, match="precondition"):
        carleman_inequality_table(g, None, Constant(0.0), weight(Linear([1.0]), 1.0), ["left"], 0.0,
                                  [0.2], n_samples=4, extra=bad)
