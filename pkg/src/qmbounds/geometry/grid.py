"""Structured grids, boundary components, subregions and trapezoid quadrature."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

KINDS = ("interval", "rectangle", "periodic-strip")
MIN_NODES = 8


@dataclass(frozen=True)
class BoundaryComponent:
    """Boundary nodes of one connected component, with outward unit normals."""

    name: str
    nodes: np.ndarray      # flat node indices
    normals: np.ndarray    # (k, dim)
    weights: np.ndarray    # boundary quadrature weights, flat chart measure
    axis: np.ndarray       # normal axis per node (-1 at rectangle corners)
    inward: np.ndarray     # +1/-1 index step along ``axis`` pointing into the domain


@dataclass(frozen=True, eq=False)
class Grid:
    kind: str
    lo: tuple
    hi: tuple
    shape: tuple
    periodic: tuple
    h: float
    axes: tuple = field(repr=False)
    spacing: tuple = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    boundary_mask: np.ndarray = field(repr=False)
    interior: np.ndarray = field(repr=False)
    components: dict = field(repr=False)
    edges: dict = field(repr=False)

    @property
    def dim(self):
        return len(self.shape)

    @property
    def n_nodes(self):
        return int(np.prod(self.shape))

    @property
    def n_interior(self):
        return int(self.interior.size)

    @property
    def measure(self):
        return float(np.prod(np.subtract(self.hi, self.lo)))

    @property
    def diameter(self):
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    @property
    def cell_volume(self):
        return float(np.prod(self.spacing))

    def component(self, name) -> BoundaryComponent:
        if name in self.components:
            return self.components[name]
        if name in self.edges:
            return self.edges[name]
        raise KeyError(f"grid has no boundary component or edge {name!r}; "
                       f"known: {sorted(self.components) + sorted(self.edges)}")

    def embed(self, u):
        """Interior-node values -> full-grid array (zero Dirichlet data)."""
        u = np.asarray(u)
        if u.shape[0] == self.n_nodes:
            return u
        if u.shape[0] != self.n_interior:
            raise ValueError(f"expected {self.n_interior} interior or {self.n_nodes} node values, got {u.shape[0]}")
        full = np.zeros((self.n_nodes,) + u.shape[1:], dtype=u.dtype)
        full[self.interior] = u
        return full

    def restrict(self, u):
        u = np.asarray(u)
        if u.shape[0] == self.n_interior:
            return u
        return u[self.interior]

    def gradient(self, u):
        """Second-order nodal gradient of a full-grid function, shape (n_nodes, dim).

        Centered differences inside, second-order one-sided at non-periodic ends,
        wraparound along periodic axes.
        """
        U = self.embed(u).reshape(self.shape)
        out = np.empty((self.n_nodes, self.dim), dtype=U.dtype)
        for a in range(self.dim):
            if self.periodic[a]:
                d = (np.roll(U, -1, axis=a) - np.roll(U, 1, axis=a)) / (2.0 * self.spacing[a])
            else:
                d = np.gradient(U, self.spacing[a], axis=a, edge_order=2)
            out[:, a] = d.ravel()
        return out

    def ravel_index(self, idx):
        return np.ravel_multi_index(idx, self.shape)


def _axis_counts(bounds, resolution, h, periodic):
    counts = []
    if isinstance(resolution, dict):
        rho = float(resolution["nodes_per_h"])
        if rho <= 0:
            raise ValueError("nodes_per_h must be positive")
        for (a, b), per in zip(bounds, periodic):
            cells = math.ceil(rho * (b - a) / h - 1e-9)
            counts.append(cells if per else cells + 1)
    else:
        counts = [int(c) for c in np.atleast_1d(resolution)]
        if len(counts) == 1 and len(bounds) > 1:
            counts = counts * len(bounds)
    if len(counts) != len(bounds):
        raise ValueError("one node count per axis required")
    if min(counts) < MIN_NODES:
        raise ValueError(f"need at least {MIN_NODES} nodes per axis, got {counts}")
    return counts


def build_grid(kind: str, bounds, resolution, h: float) -> Grid:
    """Build a structured grid.

    Parameters
    ----------
    kind : {"interval", "rectangle", "periodic-strip"}
    bounds : sequence of (lo, hi) per axis; for the strip axis 0 is the radial
        coordinate and axis 1 the periodic angle (``hi`` identified with ``lo``).
    resolution : int, sequence of int, or ``{"nodes_per_h": rho}``.  With the
        density rule every non-periodic axis gets ``ceil(rho*L/h) + 1`` nodes and
        the periodic axis ``ceil(rho*L/h)``.
    h : semiclassical parameter, recorded on the grid and used by the density rule.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown grid kind {kind!r}")
    if not h > 0:
        raise ValueError("h must be positive")
    bounds = [tuple(map(float, b)) for b in np.atleast_2d(np.asarray(bounds, dtype=float))]
    ndim = {"interval": 1, "rectangle": 2, "periodic-strip": 2}[kind]
    if len(bounds) != ndim:
        raise ValueError(f"{kind} needs {ndim} axis bounds")
    if any(b <= a for a, b in bounds):
        raise ValueError("degenerate bounds")
    periodic = (False, True) if kind == "periodic-strip" else (False,) * ndim
    counts = _axis_counts(bounds, resolution, h, periodic)

    axes, spacing, wts = [], [], []
    for (a, b), n, per in zip(bounds, counts, periodic):
        if per:
            dx = (b - a) / n
            x = a + dx * np.arange(n)
            w = np.full(n, dx)
        else:
            x = np.linspace(a, b, n)
            dx = (b - a) / (n - 1)
            w = np.full(n, dx)
            w[0] = w[-1] = 0.5 * dx
        axes.append(x)
        spacing.append(dx)
        wts.append(w)

    mesh = np.meshgrid(*axes, indexing="ij")
    nodes = np.stack([m.ravel() for m in mesh], axis=-1)
    W = wts[0]
    for w in wts[1:]:
        W = np.multiply.outer(W, w)
    weights = W.ravel()

    shape = tuple(counts)
    bmask = np.zeros(shape, dtype=bool)
    for a, per in enumerate(periodic):
        if per:
            continue
        sl = [slice(None)] * ndim
        sl[a] = 0
        bmask[tuple(sl)] = True
        sl[a] = -1
        bmask[tuple(sl)] = True
    bmask = bmask.ravel()
    interior = np.flatnonzero(~bmask)

    components, edges = _boundary_components(kind, shape, axes, spacing, periodic)
    return Grid(
        kind=kind,
        lo=tuple(b[0] for b in bounds),
        hi=tuple(b[1] for b in bounds),
        shape=shape,
        periodic=periodic,
        h=float(h),
        axes=tuple(axes),
        spacing=tuple(spacing),
        nodes=nodes,
        weights=weights,
        boundary_mask=bmask,
        interior=interior,
        components=components,
        edges=edges,
    )


def _edge(name, shape, axes, spacing, periodic, axis, side):
    ndim = len(shape)
    idx = [np.arange(n) for n in shape]
    idx[axis] = np.array([0 if side == "lo" else shape[axis] - 1])
    grids = np.meshgrid(*idx, indexing="ij")
    flat = np.ravel_multi_index(tuple(g.ravel() for g in grids), shape)
    k = flat.size
    normal = np.zeros(ndim)
    normal[axis] = -1.0 if side == "lo" else 1.0
    if ndim == 1:
        w = np.ones(1)
    else:
        other = 1 - axis
        dx = spacing[other]
        w = np.full(k, dx)
        if not periodic[other]:
            w[0] = w[-1] = 0.5 * dx
    return BoundaryComponent(
        name=name,
        nodes=flat,
        normals=np.tile(normal, (k, 1)),
        weights=w,
        axis=np.full(k, axis),
        inward=np.full(k, 1 if side == "lo" else -1),
    )


def _boundary_components(kind, shape, axes, spacing, periodic):
    if kind == "interval":
        comps = {
            "left": _edge("left", shape, axes, spacing, periodic, 0, "lo"),
            "right": _edge("right", shape, axes, spacing, periodic, 0, "hi"),
        }
        return comps, {}
    if kind == "periodic-strip":
        comps = {
            "inner": _edge("inner", shape, axes, spacing, periodic, 0, "lo"),
            "outer": _edge("outer", shape, axes, spacing, periodic, 0, "hi"),
        }
        return comps, {}
    edges = {}
    for axis, an in ((0, "x"), (1, "y")):
        for side in ("lo", "hi"):
            name = f"{an}_{side}"
            edges[name] = _edge(name, shape, axes, spacing, periodic, axis, side)
    # one connected component: merge edges, corners appear once with averaged normal
    node_w, node_n, node_axis, node_in = {}, {}, {}, {}
    for e in edges.values():
        for i, nd in enumerate(e.nodes):
            nd = int(nd)
            node_w[nd] = node_w.get(nd, 0.0) + e.weights[i]
            node_n[nd] = node_n.get(nd, 0.0) + e.normals[i]
            if nd in node_axis:
                node_axis[nd] = -1
                node_in[nd] = 0
            else:
                node_axis[nd] = int(e.axis[i])
                node_in[nd] = int(e.inward[i])
    order = sorted(node_w)
    normals = np.array([node_n[k] for k in order])
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    comp = BoundaryComponent(
        name="boundary",
        nodes=np.array(order),
        normals=normals,
        weights=np.array([node_w[k] for k in order]),
        axis=np.array([node_axis[k] for k in order]),
        inward=np.array([node_in[k] for k in order]),
    )
    return {"boundary": comp}, edges


# --------------------------------------------------------------------------
# subregions


@dataclass(frozen=True, eq=False)
class Subregion:
    """Node mask over a grid plus the descriptor that generated it."""

    mask: np.ndarray
    descriptor: dict

    @property
    def count(self):
        return int(self.mask.sum())

    def __and__(self, other):
        return Subregion(self.mask & other.mask, {"kind": "intersection", "parts": [self.descriptor, other.descriptor]})

    def __or__(self, other):
        return union(self, other)

    def __invert__(self):
        return complement(self)

    def issubset(self, other):
        return bool(np.all(~self.mask | other.mask))


def _tol(grid):
    return 1e-9 * max(grid.spacing)


def box(grid: Grid, lo, hi, closed=False) -> Subregion:
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    t = _tol(grid)
    x = grid.nodes
    if closed:
        m = np.all((x >= lo - t) & (x <= hi + t), axis=1)
    else:
        m = np.all((x > lo + t) & (x < hi - t), axis=1)
    return Subregion(m, {"kind": "box", "lo": lo.tolist(), "hi": hi.tolist(), "closed": bool(closed)})


def ball(grid: Grid, center, radius, closed=False) -> Subregion:
    c = np.atleast_1d(np.asarray(center, dtype=float))
    r = np.linalg.norm(grid.nodes - c, axis=1)
    t = _tol(grid)
    m = r <= radius + t if closed else r < radius - t
    return Subregion(m, {"kind": "ball", "center": c.tolist(), "radius": float(radius), "closed": bool(closed)})


def sublevel(grid: Grid, fld, level) -> Subregion:
    """``{x : fld(x) <= level}``."""
    m = fld(grid.nodes) <= level
    return Subregion(m, {"kind": "sublevel", "field": fld.descriptor, "level": float(level)})


def complement(region: Subregion) -> Subregion:
    return Subregion(~region.mask, {"kind": "complement", "of": region.descriptor})


def union(*regions: Subregion) -> Subregion:
    m = np.zeros_like(regions[0].mask)
    for r in regions:
        m = m | r.mask
    return Subregion(m, {"kind": "union", "parts": [r.descriptor for r in regions]})


def whole(grid: Grid) -> Subregion:
    return Subregion(np.ones(grid.n_nodes, dtype=bool), {"kind": "whole"})


def region_from_descriptor(grid: Grid, desc: dict) -> Subregion:
    from .fields import field_from_descriptor

    kind = desc["kind"]
    if kind == "box":
        return box(grid, desc["lo"], desc["hi"], desc.get("closed", False))
    if kind == "ball":
        return ball(grid, desc["center"], desc["radius"], desc.get("closed", False))
    if kind == "sublevel":
        return sublevel(grid, field_from_descriptor(desc["field"]), desc["level"])
    if kind == "complement":
        return complement(region_from_descriptor(grid, desc["of"]))
    if kind == "union":
        return union(*[region_from_descriptor(grid, d) for d in desc["parts"]])
    if kind == "intersection":
        a, b = (region_from_descriptor(grid, d) for d in desc["parts"])
        return a & b
    if kind == "whole":
        return whole(grid)
    raise ValueError(f"unknown region kind {kind!r}")


def check_region(grid: Grid, region: Subregion) -> bool:
    """Recompute the mask from the descriptor; True iff consistent."""
    return bool(np.array_equal(region_from_descriptor(grid, region.descriptor).mask, region.mask))


# --------------------------------------------------------------------------
# quadrature


def integrate(grid: Grid, region: Subregion | None, values) -> float:
    """Composite trapezoid integral of nodal ``values`` restricted to ``region``."""
    v = np.asarray(values)
    if v.shape[0] == grid.n_interior and grid.n_interior != grid.n_nodes:
        v = grid.embed(v)
    if v.shape[0] != grid.n_nodes:
        raise ValueError(f"values have {v.shape[0]} entries, grid has {grid.n_nodes} nodes")
    w = grid.weights if region is None else grid.weights * region.mask
    return float(np.sum(w * v))


def boundary_integrate(grid: Grid, component: str, values) -> float:
    """Trapezoid integral over a boundary component (or rectangle edge).

    ``values`` are either per-component-node or full-grid nodal values.
    """
    comp = grid.component(component)
    v = np.asarray(values)
    if v.shape[0] == grid.n_nodes and comp.nodes.size != grid.n_nodes:
        v = v[comp.nodes]
    if v.shape[0] != comp.nodes.size:
        raise ValueError(f"component {component!r} has {comp.nodes.size} nodes, got {v.shape[0]} values")
    return float(np.sum(comp.weights * v))
