import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qmbounds import kernels


def _graph(rng, n=60, deg=5):
    nbr = rng.integers(-1, n, size=(n, deg))
    cost = rng.uniform(0.0, 2.0, size=(n, deg))
    cost[rng.random((n, deg)) < 0.1] = 0.0
    return nbr.astype(np.int64), cost


@given(st.integers(0, 2**31 - 1))
def test_dijkstra_backends_identical(seed):
    rng = np.random.default_rng(seed)
    nbr, cost = _graph(rng)
    src = rng.random(nbr.shape[0]) < 0.05
    src[0] = True
    a = kernels.dijkstra(nbr, cost, src, backend="numba")
    b = kernels.dijkstra(nbr, cost, src, backend="numpy")
    assert np.array_equal(a, b)


def test_flow_backends_agree():
    rng = np.random.default_rng(0)
    centers = np.array([[0.3, 0.3], [0.4, 0.35]])
    dirs = np.array([[0.1, 0.05], [0.1, 0.05]])
    r_in = np.full(2, 0.07)
    r_out = 4 * r_in
    steps = kernels.calibrate_steps(centers, dirs, r_in, r_out)
    pts = rng.uniform(0, 1, size=(50, 2))
    Ya, Ja, Ka = kernels.flow_hops(pts, centers, dirs, r_in, r_out, steps, backend="numba")
    Yb, Jb, Kb = kernels.flow_hops(pts, centers, dirs, r_in, r_out, steps, backend="numpy")
    assert np.allclose(Ya, Yb, atol=1e-13)
    assert np.allclose(Ja, Jb, atol=1e-11)
    assert np.allclose(Kb, Ka, atol=1e-9, rtol=1e-9)


def test_flow_is_identity_off_support_and_moves_center():
    centers = np.array([[0.5, 0.5]])
    dirs = np.array([[0.1, 0.0]])
    r_in = np.array([0.055])
    r_out = 4 * r_in
    steps = kernels.calibrate_steps(centers, dirs, r_in, r_out)
    Y, J, _ = kernels.flow_hops(np.array([[0.95, 0.95], [0.45, 0.5]]), centers, dirs, r_in, r_out, steps)
    assert np.array_equal(Y[0], [0.95, 0.95]) and np.array_equal(J[0], np.eye(2))
    assert np.allclose(Y[1], [0.55, 0.5], atol=1e-9)


def test_backend_switch():
    old = kernels.get_backend()
    try:
        kernels.set_backend("numpy")
        assert kernels.get_backend() == "numpy"
        with pytest.raises(ValueError):
            kernels.set_backend("cuda")
    finally:
        kernels.set_backend(old)
