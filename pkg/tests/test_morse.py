import math

import numpy as np
import pytest

from qmbounds.carleman import (
    MorseError,
    annulus_weight,
    check_compatibility,
    find_critical_points,
    generate_morse,
    make_compatible_pair,
    morse_report,
    normal_derivative,
    relocate_critical_points,
)
from qmbounds.geometry import SumField, ball, build_grid

SQUARE = build_grid("rectangle", [[0, 1], [0, 1]], 41, 1.0)
STRIP = build_grid("periodic-strip", [[1, 2], [0, 2 * math.pi]], [41, 64], 1.0)


@pytest.fixture(scope="module")
def relocated():
    psi0, rep0 = generate_morse(SQUARE, "star", {"center": [0.3, 0.35]})
    target = ball(SQUARE, [0.7, 0.65], 0.1)
    psi, info = relocate_critical_points(psi0, rep0, SQUARE, target)
    return psi0, rep0, psi, info, target


def test_star_family():
    psi, rep = generate_morse(SQUARE, "star")
    assert len(rep.critical_points) == 1
    c = rep.critical_points[0]
    assert c.kind == "maximum" and np.allclose(c.location, [0.5, 0.5], atol=1e-12)
    assert c.grad_norm <= 1e-9
    assert all(v["max"] < 0 for v in rep.boundary_normal.values())
    assert rep.nonneg and rep.is_morse


def test_perturbed_family_is_admissible():
    psi, rep = generate_morse(SQUARE, "perturbed", {"n_bumps": 3, "amplitude": 0.03}, seed=4)
    assert rep.is_morse and rep.nonneg and len(rep.critical_points) >= 1
    assert all(c.grad_norm <= 1e-9 for c in rep.critical_points)


def test_annulus_family_critical_points():
    psi, rep = generate_morse(STRIP, "annulus", {"depth": 0.0})
    assert rep.critical_points == []
    assert rep.boundary_normal["inner"]["min"] > 0 and rep.boundary_normal["outer"]["max"] < 0
    s = 1.0
    psi, rep = generate_morse(STRIP, "annulus", {"depth": 0.3, "sigma_r": 0.1, "theta": s, "kappa": 0.5})
    kinds = sorted(c.kind for c in rep.critical_points)
    assert kinds == ["minimum", "saddle"]
    assert all(abs(c.location[1] - s) <= 1e-9 for c in rep.critical_points)


def test_unknown_family_and_degenerate():
    with pytest.raises(ValueError):
        generate_morse(SQUARE, "spiral")
    with pytest.raises(MorseError):
        # a maximum outside the square makes the normal derivative positive on one side
        generate_morse(SQUARE, "star", {"center": [2.0, 2.0]}, max_attempts=2)


def test_critical_points_wrap_on_periodic_axis():
    psi = annulus_weight(STRIP, depth=0.3, sigma_r=0.1, theta=0.0, kappa=0.5)
    crit = find_critical_points(psi, STRIP)
    assert len(crit) == 2
    assert all(min(abs(c.location[1]), abs(c.location[1] - 2 * math.pi)) <= 1e-9 for c in crit)


def test_relocation_moves_points_into_target(relocated):
    psi0, rep0, psi, info, target = relocated
    rep = morse_report(psi, SQUARE)
    assert len(rep.critical_points) == 1
    c = rep.critical_points[0]
    assert np.linalg.norm(c.location - np.array([0.7, 0.65])) < 0.1
    assert c.value == pytest.approx(rep0.critical_points[0].value, abs=1e-6)


def test_relocation_keeps_boundary(relocated):
    psi0, _, psi, _, _ = relocated
    b = SQUARE.boundary_mask
    assert np.max(np.abs(psi(SQUARE.nodes[b]) - psi0(SQUARE.nodes[b]))) <= 1e-9
    for name in SQUARE.components:
        assert np.max(np.abs(normal_derivative(psi, SQUARE, name) - normal_derivative(psi0, SQUARE, name))) <= 1e-9


def test_relocated_gradient_converges_second_order(relocated):
    """Analytic derivatives of the pulled-back field agree with differences at O(d^2)."""
    _, _, psi, _, _ = relocated
    x = np.random.default_rng(2).uniform(0.2, 0.8, (40, 2))
    g = psi.grad(x)
    H = psi.hess(x)
    errs, herrs = [], []
    for d in (1e-3, 1e-4, 1e-5):
        e = np.eye(2) * d
        fd = np.stack([(psi(x + v) - psi(x - v)) / (2 * d) for v in e], axis=-1)
        fdh = np.stack([(psi.grad(x + v) - psi.grad(x - v)) / (2 * d) for v in e], axis=-1)
        errs.append(np.max(np.abs(fd - g)))
        herrs.append(np.max(np.abs(fdh - H)))
    assert errs[0] / errs[1] > 50 and errs[1] / errs[2] > 50 and errs[2] < 1e-6
    assert herrs[0] / herrs[1] > 50


def test_relocation_identity_when_already_inside():
    psi0, rep0 = generate_morse(SQUARE, "star", {"center": [0.5, 0.5]})
    psi, info = relocate_critical_points(psi0, rep0, SQUARE, ball(SQUARE, [0.5, 0.5], 0.2))
    assert info["moved"] == 0
    x = SQUARE.nodes
    assert np.max(np.abs(psi(x) - psi0(x))) <= 1e-9


def test_compatibility_examples():
    free = annulus_weight(STRIP)
    rf = morse_report(free, STRIP)
    assert check_compatibility(free, rf, annulus_weight(STRIP, C=3.0), rf).passed
    psi = annulus_weight(STRIP, depth=0.3, sigma_r=0.1, theta=1.0)
    rep = morse_report(psi, STRIP)
    res = check_compatibility(psi, rep, psi, rep)
    assert not res.passed
    order = [w for w in res.witnesses if w["violation"] == "order"]
    assert len(order) == 2 * len(rep.critical_points)


def test_compatible_pair():
    pair = make_compatible_pair(STRIP, "inner", seed=0)
    again = check_compatibility(pair.psi1, morse_report(pair.psi1, STRIP), pair.psi2,
                                morse_report(pair.psi2, STRIP))
    assert again.passed and pair.compatibility.passed
    for psi in (pair.psi1, pair.psi2):
        assert normal_derivative(psi, STRIP, "inner").min() > 0
        assert normal_derivative(psi, STRIP, "outer").max() < 0
        assert psi(STRIP.nodes).min() >= 0
    assert min(len(pair.report1.critical_points), len(pair.report2.critical_points)) >= 1
    with pytest.raises(ValueError):
        make_compatible_pair(SQUARE)
