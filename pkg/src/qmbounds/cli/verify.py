"""Built-in invariant suites for ``qmbounds verify``; no config needed."""

from __future__ import annotations

import math

import numpy as np

from .. import rates, zonal
from ..carleman import symbols
from ..geometry import (
    Constant,
    ConstantMetric,
    Linear,
    Polynomial1D,
    Quadratic,
    SumField,
    Gaussian,
    TrigMetric,
    build_grid,
    integrate,
)
from ..quasimode import agmon_distance, agmon_edge_costs


def _bracket_fields():
    G = TrigMetric(np.eye(2) * 1.5, [{"freq": [1.0, 0.5], "phase": 0.3, "matrix": [[0.2, 0.1], [0.1, -0.15]]},
                                     {"freq": [-0.7, 1.3], "phase": 1.1, "matrix": [[0.1, -0.05], [-0.05, 0.2]]}])
    V = SumField([Quadratic([[1.0, 0.3], [0.3, 2.0]]), Gaussian([0.2, -0.1], 0.7, 0.5)])
    psi = SumField([Linear([0.8, -0.4], 0.2), Quadratic([[0.3, 0.1], [0.1, -0.2]])])
    return G, V, psi


def suite_carleman(points=200, seed=0):
    """Closed-form bracket against the generic Poisson bracket, and the complex form against both."""
    G, V, psi = _bracket_fields()
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.0, 1.0, (points, 2))
    xi = rng.normal(size=(points, 2))
    gamma = 1.3
    phi = symbols.weight(psi, gamma)
    generic = symbols.poisson_bracket(symbols.RePphi(G, V, phi), symbols.ImPphi(G, V, phi), x, xi)
    closed = symbols.bracket_closed_form(G, V, psi, gamma, x, xi)
    rel = float(np.max(np.abs(closed - generic) / np.maximum(np.abs(generic), 1e-300)))
    cplx = symbols.complex_bracket(G, V, phi, x, xi)
    rel_c = float(np.max(np.abs(cplx - 2.0 * generic) / np.maximum(np.abs(2.0 * generic), 1e-300)))
    return [("bracket closed form vs generic", rel <= 1e-8, rel),
            ("complex bracket vs 2{Re,Im}", rel_c <= 1e-10, rel_c)]


def suite_fit():
    out = []
    for alpha, c, hs in ((2.0, 0.0, [0.5, 0.4, 0.25, 0.2]), (0.5, math.log(3.0), [0.4, 0.2, 0.1, 0.05])):
        f = rates.fit_rate([(h, math.exp(c - alpha / h)) for h in hs])
        err = max(abs(f.alpha - alpha), abs(f.c - c), f.rms)
        out.append((f"exact exponential alpha={alpha}", err <= 1e-8, err))
    return out


def suite_quadrature():
    err = max(abs(zonal.zonal_norm_exact(n) - zonal.zonal_norm_quadrature(n)) for n in range(61))
    cap0 = abs(zonal.cap_mass(0, math.sin(0.5)) - math.log(4 * math.pi * (1 - math.cos(0.5))))
    n1 = abs(zonal.zonal_norm_exact(1) - math.log(8 * math.pi / 3))
    return [("zonal norm vs quadrature, n <= 60", err <= 1e-9, err),
            ("cap mass closed form, n = 0", cap0 <= 1e-10, cap0),
            ("zonal norm n = 1 equals 8 pi / 3", n1 <= 1e-12, n1)]


def _floyd_warshall(nbr, cost):
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import floyd_warshall

    n = nbr.shape[0]
    rows, cols, vals = [], [], []
    for i in range(n):
        for k in range(nbr.shape[1]):
            j = nbr[i, k]
            if j >= 0:
                rows.append(i)
                cols.append(j)
                vals.append(cost[i, k])
    # explicit zero-cost edges must survive the sparse format
    vals = np.asarray(vals) + 0.0
    M = csr_matrix((np.where(vals == 0.0, 1e-300, vals), (rows, cols)), shape=(n, n))
    return floyd_warshall(M, directed=True)


def suite_dijkstra():
    g = build_grid("rectangle", [[-1, 1], [-1, 1]], 14, 1.0)
    V = Quadratic(np.eye(2))
    E = 0.1
    G = ConstantMetric([[1.2, 0.2], [0.2, 0.8]])
    d = agmon_distance(g, G, V, E).d
    nbr, cost = agmon_edge_costs(g, G, V, E)
    D = _floyd_warshall(nbr, cost)
    src = np.flatnonzero(V(g.nodes) <= E)
    oracle = D[src].min(axis=0)
    err = float(np.max(np.abs(d - oracle)))
    g1 = build_grid("interval", [[0, 2]], 2001, 1.0)
    d1 = agmon_distance(g1, None, Polynomial1D([0, 0, 1]), 0.0).d
    i = int(np.argmin(np.abs(g1.nodes[:, 0] - 1.0)))
    rel = abs(d1[i] - 0.5) / 0.5
    return [("agmon distance vs all-pairs oracle", err <= 1e-12, err),
            ("1-D agmon distance d(1) = 1/2", rel <= 0.03, rel)]


def suite_rellich():
    gaps = []
    for n in (1001, 2001):
        g = build_grid("interval", [[0, 1]], n, 1.0)
        u = np.sin(np.pi * g.nodes[:, 0])
        u /= math.sqrt(integrate(g, None, u * u))
        gaps.append(rates.check_rellich(g, Constant(0.0), 1.0, u, 0.3).relative_gap)
    return [("Rellich identity gap at 2001 nodes", gaps[1] <= 0.02, gaps[1]),
            ("Rellich gap improvement on doubling", gaps[0] / gaps[1] >= 3.0, gaps[0] / gaps[1])]


SUITES = {
    "carleman": suite_carleman,
    "fit": suite_fit,
    "quadrature": suite_quadrature,
    "dijkstra": suite_dijkstra,
    "rellich": suite_rellich,
}


def run_suites(names=None):
    """``[(suite, check, passed, value)]`` for the selected suites."""
    names = list(SUITES) if not names else list(names)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise KeyError(f"unknown suite(s) {unknown}; known: {sorted(SUITES)}")
    out = []
    for name in names:
        try:
            for check, ok, val in SUITES[name]():
                out.append((name, check, bool(ok), float(val)))
        except Exception as exc:       # a crashing suite is a named failure
            out.append((name, f"raised {type(exc).__name__}: {exc}", False, float("nan")))
    return out
