import math

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from qmbounds.eigensolver import EigenSolveError, eigs_near, rayleigh_quotient
from qmbounds.geometry import Constant, Polynomial1D, Quadratic, build_grid
from qmbounds.operators import assemble_schrodinger


def _laplace(n=2001):
    g = build_grid("interval", [[0, math.pi]], n, 1.0)
    return assemble_schrodinger(g, None, Constant(0.0), 1.0)


def test_lowest_sine_modes():
    op = _laplace()
    assert eigs_near(op, 1.0, 1)[0].eigenvalue == pytest.approx(1.0, abs=1e-5)
    lam = sorted(p.eigenvalue for p in eigs_near(op, 1.0, 3))
    assert lam == pytest.approx([1.0, 4.0, 9.0], abs=1e-4)


def test_harmonic_oscillator_level():
    h = 0.1
    g = build_grid("interval", [[-8, 8]], 2401, h)
    op = assemble_schrodinger(g, None, Polynomial1D([0, 0, 1]), h)
    lam = eigs_near(op, 0.1, 1)[0].eigenvalue
    assert lam == pytest.approx(h, rel=0.02)


def test_sparse_matches_dense_oracle():
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], 38, 0.3)     # 1296 interior nodes
    op = assemble_schrodinger(g, None, Quadratic([[1.0, 0.2], [0.2, 2.0]]), 0.3)
    dense = eigs_near(op, 1.2, 4)
    sparse = eigs_near(op, 1.2, 4, dense_threshold=10)
    assert [p.eigenvalue for p in sparse] == pytest.approx([p.eigenvalue for p in dense], abs=1e-8)
    A = np.column_stack([p.vector for p in dense])
    B = np.column_stack([p.vector for p in sparse])
    assert np.max(subspace_angles(A, B)) <= 1e-6


def test_rayleigh_and_residual():
    op = _laplace(801)
    for p in eigs_near(op, 3.0, 3):
        assert rayleigh_quotient(op, p.vector) == pytest.approx(p.eigenvalue, rel=1e-9)
        # rounding floor of a matrix-vector product scales with the operator norm
        assert p.residual <= 1e-14 * abs(op.matrix).max() * 4


def test_seeded_determinism():
    op = _laplace(3001)
    a = eigs_near(op, 2.0, 2, seed=3, dense_threshold=100)
    b = eigs_near(op, 2.0, 2, seed=3, dense_threshold=100)
    for p, q in zip(a, b):
        assert p.eigenvalue == q.eigenvalue
        assert np.array_equal(p.vector, q.vector)


def test_errors():
    op = _laplace(101)
    with pytest.raises(ValueError):
        eigs_near(op, 1.0, 0)
    with pytest.raises(ValueError):
        eigs_near(op, 1.0, op.shape[0])
    with pytest.raises(EigenSolveError):
        eigs_near(_laplace(4001), 1e3, 6, dense_threshold=10, maxiter=1, tol=1e-14)
