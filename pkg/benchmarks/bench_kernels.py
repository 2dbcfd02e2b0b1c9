"""Time the numba kernels against the numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Both backends are called in the same process through the ``backend``
argument, so ``QMBOUNDS_DISABLE_NUMBA`` does not need to be toggled.  The
first numba call (compilation or cache load) is timed separately.
"""

import argparse
import time

import numpy as np

from qmbounds import kernels
from qmbounds.geometry import ConstantMetric, Quadratic, build_grid
from qmbounds.quasimode import agmon_edge_costs


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def dijkstra_case(n):
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], n, 1.0)
    V = Quadratic(np.eye(2))
    nbr, cost = agmon_edge_costs(g, ConstantMetric([[1.2, 0.2], [0.2, 0.8]]), V, 0.1)
    src = V(g.nodes) <= 0.1
    return f"dijkstra {n}x{n} grid", lambda b: kernels.dijkstra(nbr, cost, src, backend=b)


def flow_case(npts):
    rng = np.random.default_rng(0)
    pts = rng.uniform(0, 1, (npts, 2))
    centers = np.array([[0.3, 0.35], [0.5, 0.5]])
    dirs = np.array([[0.2, 0.15], [0.2, 0.15]])
    r_in, r_out = np.array([0.05, 0.05]), np.array([0.15, 0.15])
    steps = np.array([64, 64])
    return (f"flow_hops {npts} points, 2 hops",
            lambda b: kernels.flow_hops(pts, centers, dirs, r_in, r_out, steps, backend=b))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.get_backend() != "numba":
        print("numba is disabled; only the numpy backend can be timed")
    print(f"{'kernel':32s} {'numpy s':>10s} {'numba s':>10s} {'speedup':>8s} {'first numba call s':>20s}")
    for name, fn in (dijkstra_case(81), dijkstra_case(161), flow_case(2000), flow_case(20000)):
        t_np, ref = best_of(lambda: fn("numpy"), max(1, args.repeat // 2))
        if kernels.get_backend() != "numba":
            print(f"{name:32s} {t_np:10.4f}")
            continue
        t0 = time.perf_counter()
        fn("numba")
        first = time.perf_counter() - t0
        t_nb, out = best_of(lambda: fn("numba"), args.repeat)
        a, b = (ref, out) if isinstance(ref, np.ndarray) else (ref[0], out[0])
        assert np.allclose(a, b, rtol=1e-12, atol=1e-12), name
        print(f"{name:32s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f} {first:20.3f}")


if __name__ == "__main__":
    main()
