import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmbounds.geometry import (
    BoxCutoff,
    Constant,
    ConstantMetric,
    ExpField,
    Gaussian,
    Linear,
    Polynomial1D,
    Quadratic,
    SumField,
    TrigMetric,
    build_grid,
)
from qmbounds.operators import (
    apply,
    assemble_conjugated,
    assemble_schrodinger,
    boundary_flux,
    check_elliptic_estimate,
    commutator_cutoff_apply,
    export_triplets,
    h1h_norm,
    l2_norm,
    normal_trace,
    residual,
)
from qmbounds.eigensolver import eigs_near

TRIG = TrigMetric(np.eye(2) * 1.5, [{"freq": [1.0, 0.5], "phase": 0.3, "matrix": [[0.2, 0.1], [0.1, -0.15]]},
                                    {"freq": [-0.7, 1.3], "phase": 1.1, "matrix": [[0.1, -0.05], [-0.05, 0.2]]}])


def _bump(grid, rng):
    """Smooth field vanishing to high order at the boundary of the box."""
    lo, hi = np.array(grid.lo), np.array(grid.hi)
    t = (grid.nodes - lo) / (hi - lo)
    base = np.prod(np.sin(np.pi * t) ** 4, axis=1)
    c = rng.normal(size=(3, grid.dim))
    return base * (1.0 + 0.3 * np.sin(grid.nodes @ c[0]) + 0.2 * np.cos(grid.nodes @ c[1]))


def test_1d_stencil_row():
    g = build_grid("interval", [[0, 1]], 11, 1.0)
    op = assemble_schrodinger(g, None, Constant(0.0), 1.0)
    A = op.matrix.toarray()
    dx2 = g.spacing[0] ** 2
    assert A[4, 4] == pytest.approx(2 / dx2)
    assert A[4, 3] == pytest.approx(-1 / dx2) and A[4, 5] == pytest.approx(-1 / dx2)
    assert np.count_nonzero(A[4]) == 3


def test_sine_spectrum_and_order():
    errs = []
    for n in (1001, 2001):
        g = build_grid("interval", [[0, math.pi]], n, 1.0)
        op = assemble_schrodinger(g, None, Constant(0.0), 1.0)
        lam = np.linalg.eigvalsh(op.matrix.toarray())[0]
        errs.append(abs(lam - 1.0))
    assert errs[1] <= 1e-5
    assert 3.5 <= errs[0] / errs[1] <= 4.5


def test_separable_anisotropic_apply():
    errs = []
    for n in (41, 81):
        g = build_grid("rectangle", [[0, 1], [0, 1]], n, 0.3)
        op = assemble_schrodinger(g, ConstantMetric(np.diag([2.0, 1.0])), Constant(0.0, 2), 0.3)
        x, y = g.nodes[:, 0], g.nodes[:, 1]
        u = (np.sin(np.pi * x) * np.sin(np.pi * y))[g.interior]
        errs.append(np.max(np.abs(apply(op, u) - 3 * np.pi ** 2 * 0.09 * u)))
    assert errs[1] < 1e-3 and errs[0] / errs[1] > 3.5


@pytest.mark.parametrize("G", [None, ConstantMetric([[1.2, 0.3], [0.3, 0.9]]), TRIG])
def test_symmetry_and_green(G, rng):
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], 17, 0.5)
    V = SumField([Quadratic(np.eye(2)), Gaussian([0.1, 0.2], 0.5, 0.7)])
    op = assemble_schrodinger(g, G, V, 0.5)
    A = op.matrix
    assert abs(A - A.T).max() <= 1e-12 * abs(A).max()
    u, v = rng.normal(size=(2, g.n_interior))
    lhs, rhs = (A @ u) @ v, u @ (A @ v)
    assert abs(lhs - rhs) <= 1e-10 * max(abs(lhs), 1.0)


def test_conjugated_constant_weight_is_plain():
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], 13, 0.5)
    V = Quadratic(np.eye(2))
    P = assemble_schrodinger(g, TRIG, V, 0.5)
    Pc = assemble_conjugated(g, TRIG, V, Constant(3.0, 2), 0.5)
    assert abs(P.full - Pc.full).max() == 0.0


def test_conjugated_hand_stencil_1d():
    g = build_grid("interval", [[0, 1]], 201, 0.3)
    h = 0.3
    op = assemble_conjugated(g, None, Constant(0.0), Linear([1.0]), h)
    x = g.nodes[:, 0]
    u = np.sin(np.pi * x) ** 3
    up = 3 * np.pi * np.sin(np.pi * x) ** 2 * np.cos(np.pi * x)
    upp = 3 * np.pi ** 2 * (2 * np.sin(np.pi * x) * np.cos(np.pi * x) ** 2 - np.sin(np.pi * x) ** 3)
    hand = -h * h * upp + 2 * h * up - u      # e^{x/h} (-h^2 d^2) e^{-x/h}
    got = op.full @ u
    assert np.max(np.abs(got - hand[g.interior])) < 1e-3


def test_conjugation_consistency_1d(rng):
    """Direct assembly against exponential scaling at moderate h, 50 random fields."""
    h = 0.5
    g = build_grid("interval", [[-1, 1]], 4001, h)
    V = Polynomial1D([0.2, 0.0, 1.0])
    phi = ExpField(Linear([1.0]), 1.0)
    P = assemble_schrodinger(g, None, V, h)
    Pc = assemble_conjugated(g, None, V, phi, h)
    w = np.exp(phi(g.nodes) / h)
    worst = 0.0
    for _ in range(50):
        u = _bump(g, rng)
        direct = Pc.full @ u
        scaled = w[g.interior] * (P.full @ (u / w))
        worst = max(worst, np.max(np.abs(direct - scaled)) / np.max(np.abs(scaled)))
    assert worst <= 1e-6


def test_conjugation_consistency_2d_converges(rng):
    """In 2-D the two routes differ by truncation error; the gap shrinks at second order."""
    h = 0.5
    V = Quadratic(np.eye(2))
    phi = ExpField(Linear([0.6, 0.3]), 1.0)
    gaps = []
    for n in (41, 81, 161):
        g = build_grid("rectangle", [[-1, 1], [-1, 1]], n, h)
        P = assemble_schrodinger(g, TRIG, V, h)
        Pc = assemble_conjugated(g, TRIG, V, phi, h)
        w = np.exp(phi(g.nodes) / h)
        u = _bump(g, np.random.default_rng(5))
        direct = Pc.full @ u
        scaled = w[g.interior] * (P.full @ (u / w))
        gaps.append(np.max(np.abs(direct - scaled)) / np.max(np.abs(scaled)))
    assert gaps[0] / gaps[1] > 3.5 and gaps[1] / gaps[2] > 3.5


def test_residual_and_norms():
    small = build_grid("interval", [[0, 1]], 201, 1.0)
    op = assemble_schrodinger(small, None, Constant(0.0), 0.2)
    pair = eigs_near(op, 0.4, k=1)[0]
    assert pair.residual <= 1e-10
    g = build_grid("interval", [[0, 1]], 2001, 1.0)
    x = g.nodes[:, 0]
    assert residual(op, np.zeros(small.n_interior), 1.0) == 0.0
    ones = np.ones(g.n_nodes)
    assert l2_norm(g, None, ones) == pytest.approx(1.0, abs=1e-12)
    assert h1h_norm(g, None, ones, 0.7) == pytest.approx(1.0, abs=1e-12)
    u = np.sin(np.pi * x)
    h = 0.3
    assert l2_norm(g, None, u) == pytest.approx(math.sqrt(0.5), abs=1e-4)
    assert h1h_norm(g, None, u, h) ** 2 == pytest.approx(0.5 + h * h * np.pi ** 2 / 2, abs=1e-4)


@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3), st.floats(0.05, 2.0))
def test_h1h_dominates_l2(c, h):
    g = build_grid("interval", [[0, 1]], 101, 1.0)
    x = g.nodes[:, 0]
    u = c[0] * np.sin(np.pi * x) + c[1] * np.sin(3 * np.pi * x) + c[2] * x * (1 - x)
    assert h1h_norm(g, None, u, h) >= l2_norm(g, None, u) - 1e-15


def test_commutator_examples():
    g = build_grid("interval", [[0, 1]], 101, 1.0)
    h = 0.3
    one = Constant(1.0)
    u = np.sin(np.pi * g.nodes[:, 0])
    assert np.max(np.abs(commutator_cutoff_apply(g, one, u, h))) == 0.0
    res = commutator_cutoff_apply(g, Polynomial1D([0, 0, 1]), np.ones(g.n_nodes), h)
    assert np.allclose(res, -2 * h * h, atol=1e-14)
    # locality: chi is flat where u lives
    x = g.nodes[:, 0]
    u = np.where(x < 0.4, np.sin(np.pi * x / 0.4) ** 3, 0.0)
    chi = SumField([Constant(1.0), Gaussian([0.9], 0.05, 1.0)])
    out = commutator_cutoff_apply(g, chi, u, h)
    assert np.max(np.abs(out[x > 0.45])) == 0.0


def test_normal_trace_examples():
    g = build_grid("interval", [[0, 1]], 2001, 1.0)
    h = 0.25
    u = np.sin(np.pi * g.nodes[:, 0])
    t = normal_trace(g, "left", u, h)
    assert t[0] == pytest.approx(-h * np.pi, abs=1e-5)
    assert boundary_flux(g, "left", np.zeros(g.n_nodes), h) == 0.0
    with pytest.raises(ValueError):
        normal_trace(g, "left", np.cos(g.nodes[:, 0]), h)
    g2 = build_grid("rectangle", [[0, 1], [0, 1]], 201, 1.0)
    x, y = g2.nodes[:, 0], g2.nodes[:, 1]
    u2 = np.sin(np.pi * x) * np.sin(np.pi * y)
    # flux on the edge x = 0 through the boundary component
    comp = g2.component("boundary")
    tr = normal_trace(g2, "boundary", u2, h)
    on_edge = (np.abs(g2.nodes[comp.nodes, 0]) < 1e-12) & (comp.axis == 0)
    ys = g2.nodes[comp.nodes[on_edge], 1]
    order = np.argsort(ys)
    flux = math.sqrt(np.trapezoid(tr[on_edge][order] ** 2, ys[order]))
    assert flux == pytest.approx(h * np.pi * math.sqrt(0.5), abs=1e-3)


def test_elliptic_ratio(tmp_path):
    g = build_grid("interval", [[0, math.pi]], 801, 1.0)
    h = 0.5
    op = assemble_schrodinger(g, None, Constant(0.0), h)
    p = eigs_near(op, 1.0, 1)[0]
    r = check_elliptic_estimate(g, None, Constant(0.0), h, p.eigenvalue, Constant(1.0), p.vector, op)
    assert r == pytest.approx(p.eigenvalue, rel=1e-3)
    x = g.nodes[:, 0]
    u = np.where(x < 1.0, np.sin(np.pi * x) ** 2, 0.0)
    chi = BoxCutoff([2.0], [2.5], [1.9], [2.6])
    # chi lives where u vanishes: both integrals are zero, which is an error
    with pytest.raises(ValueError):
        check_elliptic_estimate(g, None, Constant(0.0), h, 0.0, chi, u[g.interior])
    export_triplets(op, tmp_path / "op.txt")
    lines = (tmp_path / "op.txt").read_text().splitlines()
    assert lines[0].startswith("# n=") and len(lines) == 1 + op.matrix.nnz


def test_elliptic_ratio_bounded_over_sweep():
    V = Polynomial1D([0, 0, 1])
    ratios = []
    for h in (0.4, 0.2, 0.1, 0.05):
        g = build_grid("interval", [[-4, 4]], {"nodes_per_h": 12}, h)
        op = assemble_schrodinger(g, None, V, h)
        p = eigs_near(op, 0.0, 1)[0]
        ratios.append(check_elliptic_estimate(g, None, V, h, p.eigenvalue, Constant(1.0), p.vector, op))
    assert max(ratios) <= 2 * ratios[0]
