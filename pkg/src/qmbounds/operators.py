"""Discrete semiclassical Schrodinger operators and semiclassical norms.

The second-order part is assembled edge by edge in flux form, so the
unconjugated operator is symmetric by construction.  Rows are kept for every
interior node against every grid node (``op.full``); the Dirichlet operator
``op.matrix`` is its restriction to interior columns.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import ConstantMetric, Grid, MetricField, ScalarField, Subregion, integrate
from .geometry.grid import boundary_integrate


@dataclass(frozen=True, eq=False)
class AssembledOperator:
    matrix: sp.csr_matrix          # interior x interior (Dirichlet realization)
    full: sp.csr_matrix            # interior rows x all grid nodes
    h: float
    grid: Grid = field(repr=False)
    G: MetricField = field(repr=False)
    V: ScalarField = field(repr=False)
    symmetric: bool = True
    conjugated_by: dict | None = None

    @property
    def shape(self):
        return self.matrix.shape


def _default_metric(G, grid):
    return ConstantMetric.identity(grid.dim) if G is None else G


def _neighbor(grid: Grid, multi, axis, step):
    """Flat index of the neighbor along ``axis``; -1 where it leaves the grid."""
    idx = multi.copy()
    idx[:, axis] += step
    n = grid.shape[axis]
    if grid.periodic[axis]:
        idx[:, axis] %= n
        valid = np.ones(len(idx), dtype=bool)
    else:
        valid = (idx[:, axis] >= 0) & (idx[:, axis] < n)
        idx[~valid, axis] = 0
    flat = np.ravel_multi_index(tuple(idx.T), grid.shape)
    return np.where(valid, flat, -1)


def _all_multi(grid):
    return np.array(np.unravel_index(np.arange(grid.n_nodes), grid.shape)).T


def _second_order_part(grid: Grid, G: MetricField, h: float) -> sp.csr_matrix:
    """``-h^2 sum_ij d_i g^{ij} d_j`` on all nodes (boundary rows are junk)."""
    n = grid.n_nodes
    multi = _all_multi(grid)
    X = grid.nodes
    rows, cols, vals = [], [], []
    h2 = h * h
    for a in range(grid.dim):
        nb = _neighbor(grid, multi, a, +1)
        k = np.flatnonzero(nb >= 0)
        kp = nb[k]
        mid = X[k].copy()
        mid[:, a] += 0.5 * grid.spacing[a]
        c = h2 * G(mid)[:, a, a] / grid.spacing[a] ** 2
        rows += [k, kp, k, kp]
        cols += [k, kp, kp, k]
        vals += [c, c, -c, -c]
    if grid.dim == 2:
        g01 = G(X)[:, 0, 1]
        scale = h2 / (4.0 * grid.spacing[0] * grid.spacing[1])
        xp = _neighbor(grid, multi, 0, +1)
        yp = _neighbor(grid, multi, 1, +1)
        ym = _neighbor(grid, multi, 1, -1)
        for diag_step, ynb, sign in ((+1, yp, -1.0), (-1, ym, +1.0)):
            mult2 = multi.copy()
            mult2[:, 0] += 1
            partner = np.full(n, -1)
            ok = xp >= 0
            partner[ok] = _neighbor(grid, mult2[ok], 1, diag_step)
            k = np.flatnonzero((partner >= 0) & (ynb >= 0))
            c = sign * scale * (g01[xp[k]] + g01[ynb[k]])
            rows += [k, partner[k]]
            cols += [partner[k], k]
            vals += [c, c]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def _finish(grid, A_all):
    full = A_all[grid.interior, :].tocsr()
    full.sum_duplicates()
    return full, full[:, grid.interior].tocsr()


def assemble_schrodinger(grid: Grid, G: MetricField | None, V: ScalarField, h: float) -> AssembledOperator:
    """Dirichlet discretization of ``-h^2 div(G grad) + V`` on interior nodes.

    Diagonal metric entries are sampled at edge midpoints (flux form); the
    mixed terms use the symmetric 9-point coupling with nodal ``g^{01}``.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    G = _default_metric(G, grid)
    G.check_spd(grid.nodes)
    A = _second_order_part(grid, G, h)
    A = A + sp.diags(V(grid.nodes))
    full, mat = _finish(grid, A)
    return AssembledOperator(mat, full, float(h), grid, G, V, True, None)


def assemble_conjugated(grid: Grid, G: MetricField | None, V: ScalarField, phi: ScalarField, h: float) -> AssembledOperator:
    """Conjugated operator ``e^{phi/h} P e^{-phi/h}`` from its expanded product form.

    ``P_phi u = -h^2 div(G grad u) + h div(b) u + 2h b.grad u - (phi' G phi') u + V u``
    with ``b = G phi'``.  No exponential of ``phi/h`` is ever formed.  For real
    ``phi`` the result is real; it is not symmetric.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    G = _default_metric(G, grid)
    G.check_spd(grid.nodes)
    X = grid.nodes
    Gx = G(X)
    dphi = phi.grad(X)
    b = np.einsum("nij,nj->ni", Gx, dphi)
    # div b = sum_ij d_i g^{ij} phi_j + g^{ij} phi_ij
    dG = G.deriv(X)  # (n, i, j, k)
    divb = np.einsum("niji,nj->n", dG, dphi) + np.einsum("nij,nij->n", Gx, phi.hess(X))
    pot = V(X) - np.einsum("ni,ni->n", dphi, b) + h * divb

    A = _second_order_part(grid, G, h) + sp.diags(pot)
    multi = _all_multi(grid)
    rows, cols, vals = [], [], []
    for a in range(grid.dim):
        nbp = _neighbor(grid, multi, a, +1)
        nbm = _neighbor(grid, multi, a, -1)
        k = np.flatnonzero((nbp >= 0) & (nbm >= 0))
        c = h * b[k, a] / grid.spacing[a]
        rows += [k, k]
        cols += [nbp[k], nbm[k]]
        vals += [c, -c]
    A = A + sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=A.shape,
    )
    full, mat = _finish(grid, A)
    return AssembledOperator(mat, full, float(h), grid, G, V, False, {"phi": phi.descriptor})


def apply(op: AssembledOperator, u):
    """Apply to interior values (Dirichlet) or to full nodal values."""
    u = np.asarray(u)
    if u.shape[0] == op.matrix.shape[1]:
        return op.matrix @ u
    if u.shape[0] == op.full.shape[1]:
        return op.full @ u
    raise ValueError(f"size mismatch: operator has {op.matrix.shape[1]} interior nodes, got {u.shape[0]} values")


def l2_norm(grid: Grid, region: Subregion | None, u) -> float:
    if region is not None and region.count == 0:
        raise ValueError("empty region")
    return float(np.sqrt(integrate(grid, region, np.abs(grid.embed(u)) ** 2)))


def residual(op: AssembledOperator, u, E: float) -> float:
    """``||(P - E) u||_{L^2(Omega)}`` for interior values ``u``."""
    u = np.asarray(u)
    if u.shape[0] != op.matrix.shape[1]:
        raise ValueError("size mismatch")
    r = op.matrix @ u - E * u
    return l2_norm(op.grid, None, r)


def grad_sq(grid: Grid, u, G: MetricField | None = None):
    """Nodal metric quadratic form ``(du)^T G (du)`` of the discrete gradient."""
    du = grid.gradient(u)
    if G is None:
        return np.sum(np.abs(du) ** 2, axis=1)
    Gx = G(grid.nodes)
    return np.real(np.einsum("ni,nij,nj->n", np.conj(du), Gx, du))


def h1h_norm(grid: Grid, region: Subregion | None, u, h: float, G: MetricField | None = None) -> float:
    """Semiclassical norm ``(int |u|^2 + |h grad u|^2)^(1/2)``."""
    if region is not None and region.count == 0:
        raise ValueError("empty region")
    v = np.abs(grid.embed(u)) ** 2 + h * h * grad_sq(grid, u, G)
    return float(np.sqrt(integrate(grid, region, v)))


def laplacian_of_field(fld: ScalarField, G: MetricField, x):
    """``div(G grad f)`` evaluated analytically."""
    Gx = G(x)
    dG = G.deriv(x)
    return np.einsum("...iji,...j->...", dG, fld.grad(x)) + np.einsum("...ij,...ij->...", Gx, fld.hess(x))


def commutator_cutoff_apply(grid: Grid, chi: ScalarField, u, h: float, G: MetricField | None = None):
    """``[-h^2 Delta_G, chi] u = -h^2 (Delta_G chi) u - 2 h^2 g^{ij} d_i chi d_j u`` at all nodes.

    ``chi`` derivatives are analytic, ``u`` derivatives discrete.
    """
    G = _default_metric(G, grid)
    U = grid.embed(np.asarray(u))
    X = grid.nodes
    lap = laplacian_of_field(chi, G, X)
    du = grid.gradient(U)
    cross = np.einsum("ni,nij,nj->n", chi.grad(X), G(X), du)
    return -h * h * lap * U - 2.0 * h * h * cross


def normal_trace(grid: Grid, component: str, u, h: float, G: MetricField | None = None, tol=1e-10):
    """``h N u`` on a boundary component, ``N = n_i g^{ij} d_j``.

    For Dirichlet ``u`` the tangential derivatives vanish, so
    ``N u = (n^T G n) d_n u`` with ``d_n`` a second-order one-sided difference
    along the normal axis.  Rectangle corners get 0.
    """
    G = _default_metric(G, grid)
    comp = grid.component(component)
    U = grid.embed(np.asarray(u))
    scale = max(1.0, float(np.max(np.abs(U)))) if U.size else 1.0
    if np.max(np.abs(U[comp.nodes]), initial=0.0) > tol * scale:
        raise ValueError(f"u does not vanish on component {component!r}")
    multi = np.array(np.unravel_index(comp.nodes, grid.shape)).T
    out = np.zeros(comp.nodes.size, dtype=U.dtype)
    for a in range(grid.dim):
        sel = np.flatnonzero(comp.axis == a)
        if sel.size == 0:
            continue
        step = comp.inward[sel]
        m1 = multi[sel].copy()
        m1[:, a] += step
        m2 = multi[sel].copy()
        m2[:, a] += 2 * step
        u0 = U[comp.nodes[sel]]
        u1 = U[np.ravel_multi_index(tuple(m1.T), grid.shape)]
        u2 = U[np.ravel_multi_index(tuple(m2.T), grid.shape)]
        d_in = (-3.0 * u0 + 4.0 * u1 - u2) / (2.0 * grid.spacing[a])
        n = comp.normals[sel]
        Gn = np.einsum("ki,kij,kj->k", n, G(grid.nodes[comp.nodes[sel]]), n)
        out[sel] = h * Gn * (-d_in)
    return out


def boundary_flux(grid: Grid, component: str, u, h: float, G: MetricField | None = None) -> float:
    """``||h N u||_{L^2(component)}``."""
    t = normal_trace(grid, component, u, h, G)
    return float(np.sqrt(boundary_integrate(grid, component, np.abs(t) ** 2)))


def check_elliptic_estimate(grid: Grid, G, V, h, E, chi: ScalarField, u, op: AssembledOperator | None = None) -> float:
    """Ratio ``h^2 int |chi|^2 |grad u|^2 / int_{supp chi} (|(P-E)u|^2 + |u|^2)`` for Dirichlet ``u``."""
    G = _default_metric(G, grid)
    if op is None:
        op = assemble_schrodinger(grid, G, V, h)
    ui = grid.restrict(np.asarray(u))
    X = grid.nodes
    c = chi(X)
    supp = Subregion(np.abs(c) > 0, {"kind": "support"})
    num = h * h * integrate(grid, None, np.abs(c) ** 2 * grad_sq(grid, ui, G))
    r = grid.embed(op.matrix @ ui - E * ui)
    den = integrate(grid, supp, np.abs(r) ** 2 + np.abs(grid.embed(ui)) ** 2)
    if den < 1e-30:
        raise ValueError("degenerate input: denominator below 1e-30")
    return float(num / den)


def export_triplets(op: AssembledOperator, path) -> None:
    """Write ``row col value`` lines (0-based interior indices) for debugging."""
    m = op.matrix.tocoo()
    with open(path, "w") as fh:
        fh.write(f"# n={m.shape[0]} nnz={m.nnz} h={op.h!r}\n")
        for i, j, v in zip(m.row, m.col, m.data):
            fh.write(f"{i} {j} {v!r}\n")
