import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmbounds.geometry import (
    Constant,
    ConstantMetric,
    ExpField,
    Linear,
    Polynomial1D,
    Quadratic,
    TrigMetric,
    ball,
    boundary_integrate,
    box,
    build_grid,
    check_region,
    integrate,
    sublevel,
    validate_field,
)
from qmbounds.geometry.fields import CallableField

TWO_PI = 2 * math.pi


def test_interval_constructor():
    g = build_grid("interval", [[-2, 2]], 401, 0.1)
    assert g.spacing[0] == pytest.approx(0.01)
    assert len(g.components) == 2
    assert all(c.nodes.size == 1 for c in g.components.values())


def test_strip_constructor():
    g = build_grid("periodic-strip", [[1, 2], [0, TWO_PI]], [101, 128], 0.2)
    assert set(g.components) == {"inner", "outer"}
    assert all(c.nodes.size == 128 for c in g.components.values())


def test_nodes_per_h_rule():
    g = build_grid("rectangle", [[0, 1], [0, 1]], {"nodes_per_h": 10}, 0.05)
    assert g.shape == (201, 201)
    assert max(g.spacing) <= 0.05 / 10 + 1e-15


def test_bad_grids():
    with pytest.raises(ValueError):
        build_grid("interval", [[1, 0]], 11, 0.1)
    with pytest.raises(ValueError):
        build_grid("interval", [[0, 1]], 11, 0.0)
    with pytest.raises(ValueError):
        build_grid("sphere", [[0, 1]], 11, 0.1)


def test_integrate_examples():
    g2 = build_grid("rectangle", [[0, 1], [0, 1]], 21, 1.0)
    assert integrate(g2, None, np.ones(g2.n_nodes)) == pytest.approx(1.0, abs=1e-12)
    g = build_grid("interval", [[0, 1]], 401, 1.0)
    x = g.nodes[:, 0]
    assert integrate(g, None, np.sin(np.pi * x) ** 2) == pytest.approx(0.5, abs=1e-6)
    g = build_grid("interval", [[-1, 1]], 2001, 1.0)
    x = g.nodes[:, 0]
    neg = sublevel(g, Linear([1.0]), 0.0)
    assert integrate(g, neg, x * x) == pytest.approx(1 / 3, abs=1e-4)


def test_boundary_integrate_examples():
    g2 = build_grid("rectangle", [[0, 1], [0, 1]], 21, 1.0)
    assert boundary_integrate(g2, "x_lo", np.ones(g2.n_nodes)) == pytest.approx(1.0, abs=1e-12)
    g = build_grid("periodic-strip", [[1, 2], [0, TWO_PI]], [11, 64], 1.0)
    th = g.nodes[:, 1]
    assert boundary_integrate(g, "outer", np.ones(g.n_nodes)) == pytest.approx(TWO_PI, abs=1e-10)
    assert boundary_integrate(g, "outer", np.cos(th) ** 2) == pytest.approx(math.pi, abs=1e-10)


def test_quadrature_second_order():
    errs = []
    for n in (41, 81, 161):
        g = build_grid("interval", [[-1, 1]], n, 1.0)
        x = g.nodes[:, 0]
        errs.append(abs(integrate(g, None, np.exp(x)) - (math.e - 1 / math.e)))
    assert errs[0] / errs[1] >= 3 and errs[1] / errs[2] >= 3


def test_normals_point_outward():
    for g in (build_grid("interval", [[0, 1]], 11, 1.0),
              build_grid("rectangle", [[0, 1], [0, 2]], [9, 11], 1.0),
              build_grid("periodic-strip", [[1, 2], [0, TWO_PI]], [9, 16], 1.0)):
        for comp in g.components.values():
            multi = np.array(np.unravel_index(comp.nodes, g.shape)).T
            for k, a in enumerate(comp.axis):
                if a < 0:
                    continue
                offset = np.zeros(g.dim)
                offset[a] = comp.inward[k] * g.spacing[a]
                assert comp.normals[k] @ offset < 0
                assert 0 <= multi[k, a] + comp.inward[k] < g.shape[a]


@given(st.floats(0.0, 3.0))
def test_strip_periodic_shift(shift):
    g = build_grid("periodic-strip", [[1, 2], [0, TWO_PI]], [9, 64], 1.0)
    r, th = g.nodes[:, 0], g.nodes[:, 1]
    f = lambda t: r * np.exp(np.sin(t + shift)) + np.cos(2 * t)
    assert integrate(g, None, f(th + TWO_PI)) == pytest.approx(integrate(g, None, f(th)), rel=1e-12)


def test_region_masks_and_descriptors():
    g = build_grid("rectangle", [[0, 1], [0, 1]], 21, 1.0)
    b = box(g, [0.2, 0.2], [0.6, 0.6])
    assert check_region(g, b)
    assert check_region(g, ball(g, [0.5, 0.5], 0.3) | b)
    assert check_region(g, ~b)
    assert b.issubset(box(g, [0.1, 0.1], [0.7, 0.7]))
    x = g.nodes
    assert np.all((x[b.mask] > 0.2) & (x[b.mask] < 0.6))


def test_validate_field_examples():
    g = build_grid("rectangle", [[0, 1], [0, 1]], 11, 1.0)
    lin = validate_field(Linear([0.3, -1.2], 0.5), g)
    assert lin.passed and lin.max_gradient_error < 1e-9 and lin.max_hessian_error < 1e-9
    ex = validate_field(ExpField(Linear([1.0, 0.0]), 2.0), g)
    assert ex.passed and ex.max_gradient_error <= 1e-6 and ex.max_hessian_error <= 1e-6
    q = Quadratic(np.eye(2))
    wrong = CallableField(q, lambda x: 3.0 * q.grad(x), q.hess, 2, "wrong-grad")
    assert not validate_field(wrong, g).passed


def test_builtin_fields_consistent():
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], 11, 1.0)
    for f in (Quadratic([[1.0, 0.3], [0.3, 2.0]]), Constant(2.0, 2)):
        assert validate_field(f, g).passed
    g1 = build_grid("interval", [[-2, 2]], 11, 1.0)
    assert validate_field(Polynomial1D([1.0, 0.0, -2.0, 0.0, 1.0]), g1).passed
    G = TrigMetric(np.eye(2) * 1.5, [{"freq": [1.0, 0.5], "phase": 0.3, "matrix": [[0.2, 0.1], [0.1, -0.15]]}])
    assert validate_field(G, g).passed
    assert validate_field(ConstantMetric([[2.0, 0.1], [0.1, 1.0]]), g).passed
