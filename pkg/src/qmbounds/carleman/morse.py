"""Morse weight families, critical-point search, relocation and compatible pairs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .. import kernels
from ..geometry import (
    AnnulusDimple,
    ConstantMetric,
    Gaussian,
    Grid,
    Linear,
    Quadratic,
    ScalarField,
    Subregion,
    SumField,
)

GRAD_POLISH = 1e-9
DET_MIN = 1e-8


class MorseError(RuntimeError):
    pass


class RelocationError(RuntimeError):
    pass


class CompatibilitySearchError(RuntimeError):
    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


@dataclass
class CriticalPoint:
    location: np.ndarray
    value: float
    grad_norm: float
    hess_eigenvalues: np.ndarray
    det: float

    @property
    def index(self):
        """Number of negative Hessian eigenvalues (0 minimum, dim maximum)."""
        return int(np.sum(self.hess_eigenvalues < 0))

    @property
    def kind(self):
        n = len(self.hess_eigenvalues)
        return {0: "minimum", n: "maximum"}.get(self.index, "saddle")

    def to_dict(self):
        return {
            "location": np.asarray(self.location).tolist(),
            "value": self.value,
            "grad_norm": self.grad_norm,
            "hess_eigenvalues": np.asarray(self.hess_eigenvalues).tolist(),
            "kind": self.kind,
        }


@dataclass
class MorseReport:
    critical_points: list
    boundary_normal: dict          # component -> {"min": .., "max": ..}
    nonneg: bool
    min_value: float
    family: str = ""
    seed: int | None = None
    attempts: int = 1

    @property
    def is_morse(self):
        return all(abs(c.det) >= DET_MIN for c in self.critical_points)

    @property
    def locations(self):
        if not self.critical_points:
            return np.zeros((0, 0))
        return np.array([c.location for c in self.critical_points])

    def to_dict(self):
        return {
            "family": self.family,
            "seed": self.seed,
            "critical_points": [c.to_dict() for c in self.critical_points],
            "boundary_normal": self.boundary_normal,
            "nonneg": self.nonneg,
            "min_value": self.min_value,
            "is_morse": self.is_morse,
        }


# --------------------------------------------------------------------------
# geometry helpers


def _wrap(grid: Grid, x):
    x = np.array(x, dtype=float, copy=True)
    for a in range(grid.dim):
        if grid.periodic[a]:
            L = grid.hi[a] - grid.lo[a]
            x[..., a] = grid.lo[a] + np.mod(x[..., a] - grid.lo[a], L)
    return x


def _delta(grid: Grid, x, y):
    """``x - y`` with periodic axes reduced to the shortest representative."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    for a in range(grid.dim):
        if grid.periodic[a]:
            L = grid.hi[a] - grid.lo[a]
            d[..., a] = (d[..., a] + 0.5 * L) % L - 0.5 * L
    return d


def _inside(grid: Grid, x, tol=0.0):
    ok = np.ones(x.shape[:-1], dtype=bool)
    for a in range(grid.dim):
        if not grid.periodic[a]:
            ok &= (x[..., a] >= grid.lo[a] - tol) & (x[..., a] <= grid.hi[a] + tol)
    return ok


def cell_midpoints(grid: Grid):
    mids = []
    for a, ax in enumerate(grid.axes):
        if grid.periodic[a]:
            mids.append(ax + 0.5 * grid.spacing[a])
        else:
            mids.append(0.5 * (ax[:-1] + ax[1:]))
    mesh = np.meshgrid(*mids, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def normal_derivative(psi: ScalarField, grid: Grid, component: str, G=None):
    """``N psi = n . G grad psi`` at the nodes of a boundary component."""
    comp = grid.component(component)
    X = grid.nodes[comp.nodes]
    Gx = (ConstantMetric.identity(grid.dim) if G is None else G)(X)
    return np.einsum("ki,kij,kj->k", comp.normals, Gx, psi.grad(X))


def _region_contains(region_desc, x):
    kind = region_desc.get("kind")
    x = np.asarray(x, dtype=float)
    if kind == "ball":
        c = np.asarray(region_desc["center"], dtype=float)
        return np.linalg.norm(x - c, axis=-1) < region_desc["radius"]
    if kind == "box":
        lo, hi = (np.asarray(region_desc[k], dtype=float) for k in ("lo", "hi"))
        return np.all((x > lo) & (x < hi), axis=-1)
    raise ValueError(f"relocation targets must be a ball or box region, got {kind!r}")


# --------------------------------------------------------------------------
# critical points


def _screen_cells(psi: ScalarField, grid: Grid, dilate: int = 1):
    """Cells near which every gradient component changes sign.

    The gradient is sampled once at the nodes; a cell is kept when, over its
    corners and those of the cells within ``dilate`` cells, each component takes
    both signs (zero counts as either).  A critical point can only sit in a
    kept cell unless the gradient bends through a cell without a sign change
    at the nodes, which the dilation guards against.
    """
    d = grid.dim
    g = psi.grad(grid.nodes).reshape(tuple(grid.shape) + (d,))
    for a in range(d):
        if grid.periodic[a]:
            first = np.take(g, [0], axis=a)
            g = np.concatenate([g, first], axis=a)
    lo = hi = None
    for corner in np.ndindex(*([2] * d)):
        sl = tuple(slice(c, g.shape[a] - 1 + c) for a, c in enumerate(corner))
        v = g[sl]
        lo = v if lo is None else np.minimum(lo, v)
        hi = v if hi is None else np.maximum(hi, v)
    size = (2 * dilate + 1,) * d + (1,)
    mode = ["wrap" if p else "nearest" for p in grid.periodic] + ["nearest"]
    lo = ndimage.minimum_filter(lo, size=size, mode=mode)
    hi = ndimage.maximum_filter(hi, size=size, mode=mode)
    return np.all((lo <= 0.0) & (hi >= 0.0), axis=-1).ravel()


def find_critical_points(psi: ScalarField, grid: Grid, max_iter: int = 60, dedup: float = 2.0):
    """Multi-start Newton from screened cell midpoints, deduplicated and polished.

    Starts are the midpoints of cells passing :func:`_screen_cells`.  Steps are
    capped at three grid spacings so each start converges to a nearby critical
    point or leaves; converged points closer than ``dedup`` (distance measured
    in grid spacings per axis) are merged.
    """
    x = cell_midpoints(grid)[_screen_cells(psi, grid)]
    sp = np.asarray(grid.spacing, dtype=float)
    h_max = max(grid.spacing)
    cap = 3.0 * h_max
    active = np.ones(x.shape[0], dtype=bool)
    done = np.zeros(x.shape[0], dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active & ~done)
        if idx.size == 0:
            break
        xs = x[idx]
        g = psi.grad(xs)
        gn = np.linalg.norm(g, axis=1)
        conv = gn <= GRAD_POLISH
        done[idx[conv]] = True
        idx, xs, g = idx[~conv], xs[~conv], g[~conv]
        if idx.size == 0:
            break
        H = psi.hess(xs)
        det = np.linalg.det(H)
        bad = ~np.isfinite(det) | (np.abs(det) < 1e-300)
        step = np.zeros_like(xs)
        good = ~bad
        if good.any():
            step[good] = np.linalg.solve(H[good], g[good][..., None])[..., 0]
        sn = np.linalg.norm(step, axis=1)
        fac = np.where(sn > cap, cap / np.maximum(sn, 1e-300), 1.0)
        xn = _wrap(grid, xs - fac[:, None] * step)
        left = ~_inside(grid, xn) | bad
        active[idx[left]] = False
        x[idx] = xn
    cand = np.flatnonzero(done & _inside(grid, x))
    if cand.size == 0:
        return []
    pts = x[cand]
    gn = np.linalg.norm(psi.grad(pts), axis=1)
    order = np.lexsort((np.arange(pts.shape[0]), gn))
    keep = []
    for i in order:
        if all(np.linalg.norm(_delta(grid, pts[i], pts[j]) / sp) > dedup for j in keep):
            keep.append(i)
    pts = pts[keep]
    # a couple of unrestricted Newton steps to polish
    for _ in range(3):
        H = psi.hess(pts)
        g = psi.grad(pts)
        try:
            pts = _wrap(grid, pts - np.linalg.solve(H, g[..., None])[..., 0])
        except np.linalg.LinAlgError:
            break
    out = []
    H = psi.hess(pts)
    g = psi.grad(pts)
    vals = psi(pts)
    for p, Hp, gp, v in zip(pts, H, g, vals):
        Hs = 0.5 * (Hp + Hp.T)
        out.append(CriticalPoint(p, float(v), float(np.linalg.norm(gp)), np.linalg.eigvalsh(Hs),
                                 float(np.linalg.det(Hs))))
    out = [c for c in out if c.grad_norm <= GRAD_POLISH]
    out.sort(key=lambda c: tuple(np.round(c.location, 12)))
    return out


def morse_report(psi: ScalarField, grid: Grid, G=None, family="", seed=None) -> MorseReport:
    crit = find_critical_points(psi, grid)
    bn = {}
    for name in grid.components:
        nd = normal_derivative(psi, grid, name, G)
        bn[name] = {"min": float(nd.min()), "max": float(nd.max())}
    vmin = float(np.min(psi(grid.nodes)))
    return MorseReport(crit, bn, vmin >= 0.0, vmin, family, seed)


# --------------------------------------------------------------------------
# families


def _star(grid, params, rng):
    center = np.asarray(params.get("center", 0.5 * (np.array(grid.lo) + np.array(grid.hi))), dtype=float)
    r2 = np.max(np.sum((grid.nodes - center) ** 2, axis=1))
    C = float(params.get("C", r2 + 0.1))
    return Quadratic(-np.eye(grid.dim), None, C, center)


def _perturbed(grid, params, rng):
    base = _star(grid, {k: v for k, v in params.items() if k != "C"}, rng)
    n = int(params.get("n_bumps", 3))
    amp = float(params.get("amplitude", 0.05))
    width = float(params.get("width", 0.15))
    lo, hi = np.array(grid.lo) + 2 * width, np.array(grid.hi) - 2 * width
    terms = [base]
    for _ in range(n):
        terms.append(Gaussian(lo + (hi - lo) * rng.random(grid.dim), width, amp * (2 * rng.random() - 1)))
    f = SumField(terms)
    shift = max(0.0, 0.1 - float(np.min(f(grid.nodes))))
    terms[0] = Quadratic(-np.eye(grid.dim), None, base.offset + shift, base.c)
    return SumField(terms)


def annulus_weight(grid: Grid, depth=0.0, r_center=None, sigma_r=0.1, theta=0.0, kappa=0.5,
                   gamma_side="inner", C=None) -> ScalarField:
    """``-/+ r - dimple + C`` on the strip chart, nonnegative.

    ``gamma_side`` is the component where the outward normal derivative is
    positive: ``-r`` for the inner circle, ``+r`` for the outer.
    """
    if grid.kind != "periodic-strip":
        raise ValueError("annulus family needs a periodic-strip grid")
    r0, r1 = grid.lo[0], grid.hi[0]
    rc = 0.5 * (r0 + r1) if r_center is None else float(r_center)
    sign = -1.0 if gamma_side == "inner" else 1.0
    if C is None:
        C = (r1 if sign < 0 else -r0) + depth + 0.1
        C = max(C, depth + 0.1)
    radial = Linear([sign, 0.0], float(C))
    if depth == 0.0:
        return radial
    return SumField([radial, AnnulusDimple(depth, rc, sigma_r, theta, kappa)])


def _annulus(grid, params, rng):
    p = dict(params)
    return annulus_weight(
        grid,
        depth=float(p.get("depth", 0.0)),
        r_center=p.get("r_center"),
        sigma_r=float(p.get("sigma_r", 0.1)),
        theta=float(p.get("theta", 0.0)),
        kappa=float(p.get("kappa", 0.5)),
        gamma_side=p.get("gamma_side", "inner"),
    )


FAMILIES = {"star": _star, "perturbed": _perturbed, "annulus": _annulus}


def _signs_ok(report: MorseReport, family: str, params) -> bool:
    if family == "annulus":
        gside = params.get("gamma_side", "inner")
        other = "outer" if gside == "inner" else "inner"
        bn = report.boundary_normal
        return bn[gside]["min"] > 0 and bn[other]["max"] < 0
    return all(v["max"] < 0 for v in report.boundary_normal.values())


def generate_morse(grid: Grid, family: str, params: dict | None = None, seed: int = 0,
                   max_attempts: int = 20, G=None):
    """Build a nonnegative Morse weight of a built-in family and its report.

    Families: ``star`` (``C - |x - x_c|^2``), ``perturbed`` (star plus small
    seeded Gaussian bumps) and ``annulus`` (radial slope plus a dimple making a
    saddle/extremum pair).  Degenerate or sign-violating draws are redrawn with
    a new stream, up to ``max_attempts``.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; known: {sorted(FAMILIES)}")
    params = dict(params or {})
    last = None
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, attempt])
        psi = FAMILIES[family](grid, params, rng)
        rep = morse_report(psi, grid, G, family, seed)
        rep.attempts = attempt + 1
        last = rep
        if rep.is_morse and rep.nonneg and _signs_ok(rep, family, params):
            return psi, rep
    raise MorseError(f"family {family!r} gave no admissible Morse function in {max_attempts} attempts; "
                     f"last report: {last.to_dict() if last else None}")


# --------------------------------------------------------------------------
# relocation


class RelocatedField(ScalarField):
    """``psi0 o kappa^{-1}`` for a composition of bump-field flows.

    ``kappa`` is the composition of the time-1 flows of the hops in forward
    order; ``kappa^{-1}`` applies the reversed fields in reverse order.  Values,
    gradients and Hessians follow from the flow Jacobian and its derivative.
    """

    def __init__(self, psi0: ScalarField, centers, dirs, r_in, r_out, tol=1e-9):
        self.psi0 = psi0
        self.dim = psi0.dim
        self.centers = np.asarray(centers, dtype=float).reshape(-1, self.dim)
        self.dirs = np.asarray(dirs, dtype=float).reshape(-1, self.dim)
        self.r_in = np.asarray(r_in, dtype=float).reshape(-1)
        self.r_out = np.asarray(r_out, dtype=float).reshape(-1)
        self.tol = float(tol)
        self.nsteps = (kernels.calibrate_steps(self.centers, self.dirs, self.r_in, self.r_out, self.tol)
                       if self.centers.shape[0] else np.zeros(0, dtype=np.int64))
        self._cache = (None, None)
        self.descriptor = {
            "kind": "relocated",
            "base": psi0.descriptor,
            "centers": self.centers.tolist(),
            "dirs": self.dirs.tolist(),
            "r_in": self.r_in.tolist(),
            "r_out": self.r_out.tolist(),
        }

    @property
    def n_hops(self):
        return self.centers.shape[0]

    def inverse_map(self, x):
        x = np.asarray(x, dtype=float)
        key = (x.shape, x.tobytes())
        if self._cache[0] == key:
            return self._cache[1]
        flat = x.reshape(-1, self.dim)
        out = kernels.flow_hops(flat, self.centers[::-1], -self.dirs[::-1],
                                self.r_in[::-1], self.r_out[::-1], self.nsteps[::-1])
        self._cache = (key, out)
        return out

    def forward_map(self, x):
        flat = np.asarray(x, dtype=float).reshape(-1, self.dim)
        y = kernels.flow_hops(flat, self.centers, self.dirs, self.r_in, self.r_out, self.nsteps)[0]
        return y.reshape(np.shape(x))

    def _eval(self, x):
        y, _, _ = self.inverse_map(x)
        return self.psi0(y).reshape(x.shape[:-1])

    def _grad(self, x):
        y, J, _ = self.inverse_map(x)
        g = np.einsum("nia,ni->na", J, self.psi0.grad(y))
        return g.reshape(x.shape)

    def _hess(self, x):
        y, J, K = self.inverse_map(x)
        H0 = self.psi0.hess(y)
        g0 = self.psi0.grad(y)
        H = np.einsum("nia,nij,njb->nab", J, H0, J) + np.einsum("ni,niab->nab", g0, K)
        return H.reshape(x.shape + (self.dim,))


def _targets(desc, moving, staying, dim):
    """Distinct target points inside the target region for each moving point."""
    if desc["kind"] == "ball":
        c = np.asarray(desc["center"], dtype=float)
        R = float(desc["radius"])
    else:
        lo, hi = (np.asarray(desc[k], dtype=float) for k in ("lo", "hi"))
        c = 0.5 * (lo + hi)
        R = 0.5 * float(np.min(hi - lo))
    m = len(moving)
    if m == 0:
        return []
    if m == 1 and not staying:
        return [c]
    # candidates on a ring of radius R/2, greedy farthest from occupied points
    n_cand = max(8, 4 * (m + len(staying)))
    ang = 2 * np.pi * np.arange(n_cand) / n_cand
    ring = np.zeros((n_cand, dim))
    ring[:, 0] = np.cos(ang)
    if dim > 1:
        ring[:, 1] = np.sin(ang)
    cands = [c] + list(c + 0.5 * R * ring)
    occupied = [np.asarray(s) for s in staying]
    out = []
    for _ in range(m):
        best = max(cands, key=lambda p: min([np.linalg.norm(p - o) for o in occupied] + [np.inf]))
        out.append(best)
        occupied.append(best)
        cands = [p for p in cands if p is not best]
    return out


def _hops_for(path, K):
    """Split a polyline into ``K`` hops per segment: centers and displacement vectors."""
    centers, dirs = [], []
    for a, b in zip(path[:-1], path[1:]):
        v = (b - a) / K
        for m in range(K):
            centers.append(a + (m + 0.5) * v)
            dirs.append(v)
    return np.array(centers), np.array(dirs)


def relocate_critical_points(psi0: ScalarField, report: MorseReport, grid: Grid, targets: Subregion,
                             paths: dict | None = None, transition: float = 3.0, max_hops: int = 1024,
                             boundary_margin: float | None = None, tol: float = 1e-9):
    """Move every critical point of ``psi0`` into ``targets`` by bump-field flows.

    Each critical point outside the target region travels along a polyline
    (straight by default, or ``paths[j]`` waypoints) split into hops.  A hop is
    the flow of ``eta(|y - c|) v`` whose plateau covers the hop, so the point
    lands exactly on the next waypoint.  Hop counts double until every ball
    keeps clear of the boundary, of the other critical points and targets, and
    of the other tubes.  Returns ``(psi, info)`` with ``psi = psi0 o kappa^{-1}``.
    """
    desc = targets.descriptor
    crit = [np.asarray(c.location, dtype=float) for c in report.critical_points]
    inside = [bool(_region_contains(desc, p)) for p in crit]
    moving = [j for j, ok in enumerate(inside) if not ok]
    staying = [crit[j] for j, ok in enumerate(inside) if ok]
    if not moving:
        return RelocatedField(psi0, np.zeros((0, grid.dim)), np.zeros((0, grid.dim)), [], [], tol), {
            "moved": 0, "hops": {}}
    tgt = _targets(desc, [crit[j] for j in moving], staying, grid.dim)
    margin = 2.0 * max(grid.spacing) if boundary_margin is None else float(boundary_margin)

    polys = {}
    for j, t in zip(moving, tgt):
        way = [crit[j]]
        if paths and j in paths:
            way += [np.asarray(p, dtype=float) for p in paths[j]]
        way.append(np.asarray(t, dtype=float))
        polys[j] = way
    ends = {j: polys[j][-1] for j in moving}
    K = {j: 1 for j in moving}

    def balls(j):
        c, v = _hops_for(polys[j], K[j])
        r_in = 0.55 * np.linalg.norm(v, axis=1)
        return c, v, r_in, r_in * (1.0 + transition)

    while True:
        B = {j: balls(j) for j in moving}
        bad = set()
        for j in moving:
            c, _, _, ro = B[j]
            for a in range(grid.dim):
                if (np.any(c[:, a] - ro < grid.lo[a] + margin) or np.any(c[:, a] + ro > grid.hi[a] - margin)):
                    bad.add(j)
            others = [crit[i] for i in range(len(crit)) if i != j] + [ends[i] for i in moving if i != j]
            for p in others:
                if np.any(np.linalg.norm(c - p, axis=1) <= ro):
                    bad.add(j)
            for i in moving:
                if i >= j:
                    continue
                ci, _, _, roi = B[i]
                dist = np.linalg.norm(c[:, None, :] - ci[None, :, :], axis=2)
                if np.any(dist <= ro[:, None] + roi[None, :]):
                    bad.update((i, j))
        if not bad:
            break
        for j in bad:
            K[j] *= 2
            if K[j] > max_hops:
                raise RelocationError(
                    f"tube disjointness unachievable for critical point {crit[j].tolist()} "
                    f"with {max_hops} hops per segment; supply a detour path")
    centers = np.concatenate([B[j][0] for j in moving])
    dirs = np.concatenate([B[j][1] for j in moving])
    r_in = np.concatenate([B[j][2] for j in moving])
    r_out = np.concatenate([B[j][3] for j in moving])
    psi = RelocatedField(psi0, centers, dirs, r_in, r_out, tol)
    info = {
        "moved": len(moving),
        "hops": {int(j): int(K[j]) * (len(polys[j]) - 1) for j in moving},
        "targets": {int(j): np.asarray(ends[j]).tolist() for j in moving},
        "max_tube_radius": float(r_out.max()),
    }
    return psi, info


# --------------------------------------------------------------------------
# compatibility


@dataclass
class CompatibilityResult:
    passed: bool
    witnesses: list = field(default_factory=list)


def check_compatibility(psi1: ScalarField, rep1: MorseReport, psi2: ScalarField, rep2: MorseReport,
                        tol: float = 1e-6) -> CompatibilityResult:
    """Cyclic condition: at critical points of one weight the other has nonzero
    gradient and a strictly larger value (both directions)."""
    wit = []
    for (a, ra, b, name) in ((psi1, rep1, psi2, "psi1->psi2"), (psi2, rep2, psi1, "psi2->psi1")):
        for c in ra.critical_points:
            x = np.asarray(c.location, dtype=float)[None, :]
            gn = float(np.linalg.norm(b.grad(x)[0]))
            gap = float(b(x)[0] - a(x)[0])
            if gn < tol:
                wit.append({"direction": name, "location": x[0].tolist(), "violation": "gradient", "value": gn})
            if gap < tol:
                wit.append({"direction": name, "location": x[0].tolist(), "violation": "order", "value": gap})
    return CompatibilityResult(not wit, wit)


@dataclass
class CompatiblePair:
    psi1: ScalarField
    psi2: ScalarField
    report1: MorseReport
    report2: MorseReport
    compatibility: CompatibilityResult
    params: dict
    trials: int


def make_compatible_pair(grid: Grid, gamma_side: str = "inner", seed: int = 0, max_trials: int = 200,
                         G=None, min_critical: int = 1) -> CompatiblePair:
    """Seeded search for a compatible pair of annulus weights.

    Both weights share the radial slope and constant and carry a dimple, the
    second rotated by half a turn.  At a critical point of one weight the
    other's dimple is exponentially small, so the value gap has a definite
    sign.  Each draw is accepted only after the boundary sign pattern, the
    Morse property and the compatibility check pass.
    """
    if grid.kind != "periodic-strip":
        raise ValueError("compatible pairs are built on the periodic strip")
    if gamma_side not in grid.components:
        raise ValueError(f"unknown boundary component {gamma_side!r}")
    other = "outer" if gamma_side == "inner" else "inner"
    r0, r1 = grid.lo[0], grid.hi[0]
    w = r1 - r0
    rng = np.random.default_rng(seed)
    best = None
    for trial in range(1, max_trials + 1):
        sr = w * rng.uniform(0.06, 0.12)
        params = {
            "depth": sr * np.exp(0.5) * rng.uniform(1.6, 3.0),
            "r_center": r0 + w * rng.uniform(0.35, 0.65),
            "sigma_r": sr,
            "theta": rng.uniform(0.0, 2 * np.pi),
            "kappa": rng.uniform(0.3, 0.8),
        }
        params = {k: float(v) for k, v in params.items()}
        common = dict(depth=params["depth"], r_center=params["r_center"], sigma_r=sr,
                      kappa=params["kappa"], gamma_side=gamma_side)
        psi1 = annulus_weight(grid, theta=params["theta"], **common)
        psi2 = annulus_weight(grid, theta=params["theta"] + np.pi, **common)
        rep1 = morse_report(psi1, grid, G, "annulus", seed)
        rep2 = morse_report(psi2, grid, G, "annulus", seed)
        ok_signs = all(r.boundary_normal[gamma_side]["min"] > 0 and r.boundary_normal[other]["max"] < 0
                       for r in (rep1, rep2))
        ok_morse = rep1.is_morse and rep2.is_morse and min(len(rep1.critical_points),
                                                          len(rep2.critical_points)) >= min_critical
        ok_nonneg = rep1.nonneg and rep2.nonneg
        comp = check_compatibility(psi1, rep1, psi2, rep2)
        score = int(ok_signs) + int(ok_morse) + int(ok_nonneg) + int(comp.passed)
        if best is None or score > best["score"]:
            best = {"score": score, "params": params, "witnesses": comp.witnesses}
        if ok_signs and ok_morse and ok_nonneg and comp.passed:
            params["C"] = float(psi1.terms[0].offset)
            params["gamma_side"] = gamma_side
            return CompatiblePair(psi1, psi2, rep1, rep2, comp, params, trial)
    raise CompatibilitySearchError(f"no compatible pair in {max_trials} trials", best)
