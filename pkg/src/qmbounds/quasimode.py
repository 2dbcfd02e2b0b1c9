"""Agmon distances, allowed regions, cutoffs and cutoff quasimodes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .eigensolver import EigenPair
from .geometry import (
    BallCutoff,
    BoxCutoff,
    Constant,
    Grid,
    MetricField,
    ScalarField,
    Subregion,
    sublevel,
)
from .operators import AssembledOperator, l2_norm, residual

STENCIL_1D = ((1,), (-1,))
STENCIL_2D = (
    (1, 0), (-1, 0), (0, 1), (0, -1),
    (1, 1), (1, -1), (-1, 1), (-1, -1),
    (1, 2), (1, -2), (-1, 2), (-1, -2),
    (2, 1), (2, -1), (-2, 1), (-2, -1),
)


@dataclass
class Quasimode:
    values: np.ndarray = field(repr=False)
    h: float
    E: float
    residual: float
    beta_observed: float | None = None
    vanishing_region: Subregion | None = field(default=None, repr=False)
    cutoff_mass: float = 1.0     # ||chi u|| before renormalization


@dataclass
class AgmonField:
    d: np.ndarray = field(repr=False)
    E: float
    stencil: tuple
    neighbors: np.ndarray = field(repr=False)
    costs: np.ndarray = field(repr=False)


def allowed_region(grid: Grid, V: ScalarField, E: float) -> Subregion:
    """Classically allowed set ``{V <= E}`` as a node mask."""
    return sublevel(grid, V, E)


def stencil_for(grid: Grid):
    return STENCIL_1D if grid.dim == 1 else STENCIL_2D


def neighbor_table(grid: Grid, stencil):
    """``(n_nodes, K)`` neighbor indices with periodic wrap, ``-1`` off-grid."""
    multi = np.array(np.unravel_index(np.arange(grid.n_nodes), grid.shape)).T
    cols = []
    for off in stencil:
        idx = multi + np.asarray(off)
        valid = np.ones(grid.n_nodes, dtype=bool)
        for a in range(grid.dim):
            if grid.periodic[a]:
                idx[:, a] %= grid.shape[a]
            else:
                valid &= (idx[:, a] >= 0) & (idx[:, a] < grid.shape[a])
        idx[~valid] = 0
        flat = np.ravel_multi_index(tuple(idx.T), grid.shape)
        cols.append(np.where(valid, flat, -1))
    return np.stack(cols, axis=1).astype(np.int64)


def agmon_edge_costs(grid: Grid, G: MetricField | None, V: ScalarField, E: float, stencil=None):
    """Neighbor table and edge costs ``(w_a l_a + w_b l_b) / 2``.

    ``w = sqrt((V - E)_+)`` and ``l`` is the ``G^{-1}``-length of the segment
    measured at each endpoint.
    """
    stencil = stencil_for(grid) if stencil is None else stencil
    nbr = neighbor_table(grid, stencil)
    X = grid.nodes
    w = np.sqrt(np.maximum(V(X) - E, 0.0))
    if G is None:
        Ginv = np.broadcast_to(np.eye(grid.dim), (grid.n_nodes, grid.dim, grid.dim))
    else:
        Ginv = np.linalg.inv(G(X))
    cost = np.zeros(nbr.shape)
    for k, off in enumerate(stencil):
        delta = np.asarray(off, dtype=float) * np.asarray(grid.spacing)
        ell = np.sqrt(np.einsum("i,nij,j->n", delta, Ginv, delta))
        wl = w * ell
        j = nbr[:, k]
        ok = j >= 0
        cost[ok, k] = 0.5 * (wl[ok] + wl[j[ok]])
    return nbr, cost


def agmon_distance(grid: Grid, G: MetricField | None, V: ScalarField, E: float,
                   sources: Subregion | None = None, backend: str | None = None) -> AgmonField:
    """Agmon distance to the allowed region by exact multi-source Dijkstra.

    16-neighbor stencil in 2-D (nearest, diagonal and knight moves), 2 in 1-D.
    """
    src = allowed_region(grid, V, E).mask if sources is None else sources.mask
    if not src.any():
        raise ValueError("no source nodes: the allowed region is empty and no sources were given")
    stencil = stencil_for(grid)
    nbr, cost = agmon_edge_costs(grid, G, V, E, stencil)
    d = kernels.dijkstra(nbr, cost, src, backend=backend)
    return AgmonField(d, float(E), stencil, nbr, cost)


def build_cutoff(grid: Grid, inner: Subregion, outer: Subregion, min_cells: int = 4) -> ScalarField:
    """Smooth cutoff equal to 1 on ``inner`` and 0 outside ``outer``.

    Boxes give a tensor product of quintic smoothsteps, concentric balls a
    radial one.  A side of the inner box that reaches the domain boundary is
    left open (the cutoff stays 1 up to the boundary there).  The transition
    width must be at least ``min_cells`` grid spacings.
    """
    di, do = inner.descriptor, outer.descriptor
    if not inner.issubset(outer):
        raise ValueError("inner region is not contained in the outer region")
    if di.get("kind") == "box" and do.get("kind") == "box":
        ilo, ihi = np.array(di["lo"], float), np.array(di["hi"], float)
        olo, ohi = np.array(do["lo"], float), np.array(do["hi"], float)
        glo, ghi = np.array(grid.lo), np.array(grid.hi)
        sp = np.array(grid.spacing)
        per = np.array(grid.periodic)
        # open sides: inner touches or exceeds the domain (or axis is periodic)
        open_lo = (ilo <= glo + 1e-12) | per
        open_hi = (ihi >= ghi - 1e-12) | per
        span = ghi - glo
        olo_eff = np.where(open_lo, glo - 2 * span, olo)
        ilo_eff = np.where(open_lo, glo - span, ilo)
        ohi_eff = np.where(open_hi, ghi + 2 * span, ohi)
        ihi_eff = np.where(open_hi, ghi + span, ihi)
        wl = np.where(open_lo, np.inf, ilo - olo)
        wh = np.where(open_hi, np.inf, ohi - ihi)
        if np.any(wl < min_cells * sp - 1e-12) or np.any(wh < min_cells * sp - 1e-12):
            raise ValueError(f"insufficient margin: cutoff transition narrower than {min_cells} grid cells")
        return BoxCutoff(ilo_eff, ihi_eff, olo_eff, ohi_eff)
    if di.get("kind") == "ball" and do.get("kind") == "ball":
        ci, co = np.array(di["center"]), np.array(do["center"])
        if not np.allclose(ci, co):
            raise ValueError("ball cutoffs need concentric balls")
        if do["radius"] - di["radius"] < min_cells * max(grid.spacing) - 1e-12:
            raise ValueError(f"insufficient margin: cutoff transition narrower than {min_cells} grid cells")
        return BallCutoff(ci, di["radius"], do["radius"])
    raise ValueError("build_cutoff supports box/box and concentric ball/ball region pairs")


def make_cutoff_quasimode(op: AssembledOperator, eig: EigenPair, chi: ScalarField) -> Quasimode:
    """Renormalized ``chi u`` with its residual against ``E = lambda``."""
    grid = op.grid
    c = chi(grid.nodes)
    v = c[grid.interior] * eig.vector
    mass = l2_norm(grid, None, v)
    if mass < 1e-6:
        raise ValueError(f"cutoff removed the mode: ||chi u|| = {mass:.3g} < 1e-6")
    v = v / mass
    vanish = Subregion(c == 0.0, {"kind": "cutoff-zero-set", "cutoff": chi.descriptor})
    return Quasimode(
        values=v,
        h=eig.h,
        E=eig.eigenvalue,
        residual=residual(op, v, eig.eigenvalue),
        vanishing_region=vanish,
        cutoff_mass=mass,
    )


def verify_precision(q: Quasimode, beta: float, C: float = 1.0) -> bool:
    """``residual <= C exp(-beta/h)``; ``beta = inf`` asks for an exact eigenfunction."""
    bound = 0.0 if math.isinf(beta) else C * math.exp(-beta / q.h)
    return bool(q.residual <= bound)


def identity_cutoff(grid: Grid) -> ScalarField:
    return Constant(1.0, grid.dim)
