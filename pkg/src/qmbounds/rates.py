"""h-sweeps, exponential rate fits, verdicts, weight constants and the Rellich check."""

from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._smooth import smoothstep, smoothstep_d1, smoothstep_d2
from .eigensolver import eigs_near
from .geometry import (
    ConstantMetric,
    Grid,
    ScalarField,
    Subregion,
    build_grid,
    field_from_descriptor,
    integrate,
    boundary_integrate,
    metric_from_descriptor,
    region_from_descriptor,
)
from .operators import assemble_schrodinger, boundary_flux, check_elliptic_estimate, l2_norm, normal_trace
from .quasimode import agmon_distance, build_cutoff, make_cutoff_quasimode

FLOOR = 1e-13
CONCAVITY_THRESHOLD = -0.05
MAX_RMS = 0.5
NOISE_FACTOR = 10.0


class InsufficientDataError(ValueError):
    """Fewer than four points above the amplitude floor."""


def config_hash(cfg) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    text = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=float)
    return hashlib.sha256(text.encode()).hexdigest()


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    h: float
    n_interior: int
    E: float
    eigen_residual: float
    quantities: dict = field(default_factory=dict)
    error: str | None = None

    def below_floor(self, name):
        v = self.quantities.get(name)
        return v is None or not np.isfinite(v) or abs(v) < FLOOR


@dataclass
class SweepResult:
    experiment_id: str
    config_hash: str
    rows: list
    meta: dict = field(default_factory=dict)

    def series(self, name):
        """``(h, value)`` pairs for a named quantity, rows with errors skipped."""
        return [(r.h, r.quantities[name]) for r in self.rows if r.error is None and name in r.quantities]

    def quantity_names(self):
        names = []
        for r in self.rows:
            for k in r.quantities:
                if k not in names:
                    names.append(k)
        return names

    def to_records(self):
        """Long-format rows matching the CSV schema."""
        out = []
        for r in self.rows:
            base = {"experiment_id": self.experiment_id, "h": r.h, "n_interior": r.n_interior,
                    "E": r.E, "eigen_residual": r.eigen_residual}
            if r.error is not None:
                out.append({**base, "quantity_name": "error", "value": float("nan"),
                            "below_floor_flag": True, "note": r.error})
                continue
            for name, v in r.quantities.items():
                out.append({**base, "quantity_name": name, "value": v,
                            "below_floor_flag": r.below_floor(name)})
        return out


def _domain(cfg):
    d = cfg["domain"]
    return d["kind"], d["bounds"]


def _metric(cfg, dim):
    g = cfg.get("G")
    return None if g is None else metric_from_descriptor(g, dim)


def _regions(grid, cfg, key):
    out = {}
    for name, desc in (cfg.get(key) or {}).items():
        reg = region_from_descriptor(grid, desc)
        if reg.count == 0:
            raise ValueError(f"region {key}.{name} contains no grid nodes")
        out[name] = reg
    return out


def pick_eigenpair(op, V, grid, energy):
    """Eigenpair nearest a fixed ``E`` or the ``index``-th lowest (``mode="track"``)."""
    mode = energy.get("mode", "fixed")
    if mode == "fixed":
        return eigs_near(op, float(energy["E"]), k=1)[0]
    if mode == "track":
        k = int(energy.get("index", 0))
        # every eigenvalue is >= min V, so the k+1 nearest to it are the lowest
        floor = float(np.min(V(grid.nodes)))
        pairs = sorted(eigs_near(op, floor, k=k + 1), key=lambda p: p.eigenvalue)
        return pairs[k]
    raise ValueError(f"unknown energy mode {mode!r}")


def sweep_row(cfg, h):
    """All named quantities at one ``h``; failures land in ``row.error``."""
    kind, bounds = _domain(cfg)
    try:
        grid = build_grid(kind, bounds, cfg.get("resolution", {"nodes_per_h": 10}), h)
        G = _metric(cfg, grid.dim)
        V = field_from_descriptor(cfg["V"])
        op = assemble_schrodinger(grid, G, V, h)
        eig = pick_eigenpair(op, V, grid, cfg.get("energy", {"mode": "track", "index": 0}))
    except Exception as exc:      # recorded per row, sweep continues
        return SweepRow(float(h), 0, float("nan"), float("nan"), {}, f"{type(exc).__name__}: {exc}")
    row = SweepRow(float(h), grid.n_interior, eig.eigenvalue, eig.residual)
    try:
        state = eig.vector
        cut = cfg.get("cutoff")
        if cut:
            chi = build_cutoff(grid, region_from_descriptor(grid, cut["inner"]),
                               region_from_descriptor(grid, cut["outer"]))
            q = make_cutoff_quasimode(op, eig, chi)
            state = q.values
            row.quantities["qm_residual"] = q.residual
            row.quantities["cutoff_mass"] = q.cutoff_mass
        for name, reg in _regions(grid, cfg, "omega").items():
            row.quantities[f"mass:{name}"] = l2_norm(grid, reg, state)
        for name in cfg.get("gamma") or []:
            row.quantities[f"flux:{name}"] = boundary_flux(grid, name, state, h, G)
        bnodes = grid.boundary_mask
        row.quantities["boundary_margin"] = float(np.min(V(grid.nodes[bnodes])) - eig.eigenvalue)
        ell = cfg.get("elliptic")
        if ell:
            chi_e = field_from_descriptor(ell["chi"])
            row.quantities["elliptic_ratio"] = check_elliptic_estimate(grid, G, V, h, eig.eigenvalue,
                                                                       chi_e, state, op)
    except Exception as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def run_sweep(config: dict, threads: int = 1, config_digest: str | None = None) -> SweepResult:
    """Run every ``h`` of a sweep config; rows come back ordered by decreasing ``h``.

    Config keys: ``id``, ``domain`` (``kind``, ``bounds``), ``resolution``
    (node count or ``{"nodes_per_h": rho}``), ``V`` and optional ``G``
    descriptors, ``energy`` (``{"mode": "fixed", "E": ...}`` or
    ``{"mode": "track", "index": k}``), ``h``, optional ``omega`` (named
    region descriptors), ``gamma`` (boundary component names), ``cutoff``
    (``inner``/``outer`` regions) and ``elliptic`` (``chi`` descriptor).
    """
    hs = sorted({float(h) for h in config["h"]}, reverse=True)
    if len(hs) != len(config["h"]):
        raise ValueError("h values must be distinct")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(lambda h: sweep_row(config, h), hs))
    else:
        rows = [sweep_row(config, h) for h in hs]
    meta = {}
    if config.get("omega") or config.get("gamma"):
        meta["agmon"] = agmon_prediction(config, rows)
    return SweepResult(config.get("id", "sweep"), config_digest or config_hash(config), rows, meta)


def agmon_prediction(cfg, rows) -> dict:
    """Agmon distance from the allowed region to each omega and gamma.

    Evaluated at ``cfg["agmon_E"]`` when given, otherwise at ``E`` of the
    smallest-``h`` row, on that row's grid.
    """
    ok = [r for r in rows if r.error is None]
    if not ok:
        return {}
    last = ok[-1]
    E = float(cfg.get("agmon_E", last.E))
    kind, bounds = _domain(cfg)
    grid = build_grid(kind, bounds, cfg.get("resolution", {"nodes_per_h": 10}), last.h)
    V = field_from_descriptor(cfg["V"])
    try:
        d = agmon_distance(grid, _metric(cfg, grid.dim), V, E).d
    except ValueError:
        return {}
    out = {"E": E}
    for name, reg in _regions(grid, cfg, "omega").items():
        out[f"mass:{name}"] = float(np.min(d[reg.mask]))
    for name in cfg.get("gamma") or []:
        out[f"flux:{name}"] = float(np.min(d[grid.component(name).nodes]))
    return out


# --------------------------------------------------------------------------
# fits


@dataclass
class RateFit:
    alpha: float
    c: float
    window: list
    rms: float
    concave: bool
    second_differences: list = field(default_factory=list)

    def to_dict(self):
        return {"alpha": self.alpha, "c": self.c, "window": list(self.window), "rms": self.rms,
                "concave": self.concave}


def fit_rate(pairs, floor: float = FLOOR) -> RateFit:
    """Least squares of ``log y = c - alpha / h`` over points with ``y >= floor``.

    The concavity flag is raised when every second divided difference of
    ``log y`` in ``1/h`` is below ``-0.05`` (decay faster than exponential
    across the whole window).
    """
    pts = [(float(h), float(y)) for h, y in pairs]
    pts = [(h, y) for h, y in pts if np.isfinite(y) and y >= floor and y > 0 and h > 0]
    if len(pts) < 4:
        raise InsufficientDataError(f"need >= 4 points above the {floor:g} floor, got {len(pts)}")
    return fit_log_rate([(h, math.log(y)) for h, y in pts])


def fit_log_rate(pairs) -> RateFit:
    """:func:`fit_rate` on ``(h, log y)`` pairs, for values computed in the log domain."""
    pts = sorted(((float(h), float(ly)) for h, ly in pairs), reverse=True)
    if len(pts) < 4:
        raise InsufficientDataError(f"need >= 4 points, got {len(pts)}")
    h = np.array([p[0] for p in pts])
    x = 1.0 / h
    ly = np.array([p[1] for p in pts])
    A = np.stack([np.ones_like(x), -x], axis=1)
    (c, alpha), *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ np.array([c, alpha])
    rms = float(np.sqrt(np.mean(res * res)))
    d1 = np.diff(ly) / np.diff(x)
    d2 = np.diff(d1) / (x[2:] - x[:-2])
    concave = bool(d2.size > 0 and np.all(d2 < CONCAVITY_THRESHOLD))
    return RateFit(float(alpha), float(c), h.tolist(), rms, concave, d2.tolist())


# --------------------------------------------------------------------------
# verdicts


def _all_below_floor(series):
    return bool(series) and all(abs(v) < FLOOR for _, v in series)


def _lower_bound_ok(fit: RateFit):
    return math.isfinite(fit.alpha) and not fit.concave and fit.rms <= MAX_RMS


def _precision(sweep: SweepResult):
    """Fitted ``beta`` of the quasimode residual; ``inf`` for eigenfunctions."""
    # the quasimode residual cannot drop below the eigensolver's own residual
    s = [(r.h, r.quantities["qm_residual"]) for r in sweep.rows
         if r.error is None and "qm_residual" in r.quantities
         and r.quantities["qm_residual"] > NOISE_FACTOR * r.eigen_residual]
    if not any("qm_residual" in r.quantities for r in sweep.rows):
        return math.inf, None
    if _all_below_floor(s):
        return math.inf, None
    try:
        f = fit_rate(s)
    except InsufficientDataError:
        return math.inf, None
    return f.alpha, f


def verdict_theorem1(sweep: SweepResult, omega: str, fit: RateFit | None = None) -> dict:
    """Lower bound for the mass on ``omega``.

    PASS needs a finite fitted rate, no concavity, fit RMS within 0.5 and a
    quasimode precision ``beta`` above the fitted rate.  A mass that is
    identically below the floor comes with a quasimode vanishing on ``omega``:
    the verdict is then SHARPNESS-CONFIRMED, provided the quasimode residual
    still decays exponentially.
    """
    key = f"mass:{omega}"
    series = sweep.series(key)
    beta, pfit = _precision(sweep)
    rep = {"experiment_id": sweep.experiment_id, "theorem": "theorem1", "quantity": key,
           "beta_observed": beta, "agmon_prediction": sweep.meta.get("agmon", {}).get(key)}
    if _all_below_floor(series):
        rep.update(alpha=None, c=None, rms=None, window=[])
        rep["precision_fit"] = pfit.to_dict() if pfit else None
        ok = pfit is not None and pfit.alpha > 0
        rep["verdict"] = "SHARPNESS-CONFIRMED" if ok else "FAIL"
        return rep
    try:
        fit = fit or fit_rate(series)
    except InsufficientDataError as exc:
        rep.update(alpha=None, c=None, rms=None, window=[], verdict="FAIL", reason=str(exc))
        return rep
    rep.update(fit.to_dict())
    ok = _lower_bound_ok(fit) and beta > fit.alpha
    rep["verdict"] = "PASS" if ok else "FAIL"
    return rep


def verdict_theorem2(sweep: SweepResult, gamma: str, fit: RateFit | None = None) -> dict:
    """Lower bound for the boundary flux on ``gamma``.

    As :func:`verdict_theorem1`.  When the whole boundary lies in the
    forbidden region at every row, the upper-bound check (flux decays with a
    positive fitted rate) is reported and required as well.
    """
    key = f"flux:{gamma}"
    series = sweep.series(key)
    beta, pfit = _precision(sweep)
    rep = {"experiment_id": sweep.experiment_id, "theorem": "theorem2", "quantity": key,
           "beta_observed": beta, "agmon_prediction": sweep.meta.get("agmon", {}).get(key)}
    if _all_below_floor(series):
        rep.update(alpha=None, c=None, rms=None, window=[])
        rep["precision_fit"] = pfit.to_dict() if pfit else None
        ok = pfit is not None and pfit.alpha > 0
        rep["verdict"] = "SHARPNESS-CONFIRMED" if ok else "FAIL"
        return rep
    try:
        fit = fit or fit_rate(series)
    except InsufficientDataError as exc:
        rep.update(alpha=None, c=None, rms=None, window=[], verdict="FAIL", reason=str(exc))
        return rep
    rep.update(fit.to_dict())
    ok = _lower_bound_ok(fit) and beta > fit.alpha
    margins = [v for _, v in sweep.series("boundary_margin")]
    forbidden = bool(margins) and min(margins) > 0
    rep["boundary_forbidden"] = forbidden
    if forbidden:
        upper = fit.alpha > 0
        rep["upper_bound_check"] = {"c": fit.alpha, "passed": upper}
        ok = ok and upper
    rep["verdict"] = "PASS" if ok else "FAIL"
    return rep


# --------------------------------------------------------------------------
# weight constants


@dataclass
class WeightConstants:
    context: str
    values: dict

    def __getitem__(self, k):
        return self.values[k]

    def to_dict(self):
        return {"context": self.context, **self.values}


def _closure(grid, region: Subregion):
    desc = dict(region.descriptor)
    if desc.get("kind") in ("box", "ball"):
        desc["closed"] = True
        return region_from_descriptor(grid, desc).mask
    return region.mask


def _compactly_inside(grid, a: Subregion, b: Subregion):
    """Closure of ``a`` inside ``b``, checked on nodes."""
    return bool(np.all(b.mask[_closure(grid, a)]))


def weight_constants(phi, grid: Grid, omega1: Subregion | None = None, omega2: Subregion | None = None,
                     omega: Subregion | None = None, gamma: str | None = None,
                     exclude: list | None = None) -> WeightConstants:
    """Constants of the lower-bound arguments, from node values of the weights.

    One weight with ``omega1 < omega2 < omega`` (each compactly inside the
    next): ``M1 = max phi`` off ``omega1``, ``M2 = max phi`` on the closure
    of ``omega2`` minus ``omega1``, ``m = min phi`` off ``omega1``,
    ``alpha = M2 - m`` and ``beta0 = alpha + M1 - M2``.

    A pair ``(phi1, phi2)`` with boundary component ``gamma``:
    ``M = max`` over ``gamma`` of both, ``m = min`` over the closed domain of
    both, ``Mt = max`` of both over the domain minus ``exclude[i]`` (small
    balls about the critical points of ``phi_i``, whole domain if omitted),
    ``beta0 = Mt - m`` and ``rate = M - m``.
    """
    X = grid.nodes
    if gamma is None:
        if omega1 is None or omega2 is None or omega is None:
            raise ValueError("single-weight constants need omega1, omega2 and omega")
        if not (_compactly_inside(grid, omega1, omega2) and _compactly_inside(grid, omega2, omega)):
            raise ValueError("region violation: need omega1 compactly inside omega2 compactly inside omega")
        v = phi(X)
        off1 = ~omega1.mask
        ring = _closure(grid, omega2) & off1
        M1, M2, m = float(v[off1].max()), float(v[ring].max()), float(v[off1].min())
        alpha = M2 - m
        return WeightConstants("theorem1", {"M1": M1, "M2": M2, "m": m, "alpha": alpha,
                                            "beta0": alpha + M1 - M2})
    phis = list(phi)
    if len(phis) != 2:
        raise ValueError("boundary constants need a pair of weights")
    bn = grid.component(gamma).nodes
    vals = [p(X) for p in phis]
    M = max(float(v[bn].max()) for v in vals)
    m = min(float(v.min()) for v in vals)
    Ms = []
    for i, v in enumerate(vals):
        keep = np.ones(grid.n_nodes, dtype=bool)
        if exclude is not None and exclude[i] is not None:
            keep &= ~exclude[i].mask
        Ms.append(float(v[keep].max()))
    Mt = max(Ms)
    return WeightConstants("theorem2", {"M": M, "m": m, "M1": Ms[0], "M2": Ms[1], "Mt": Mt,
                                        "beta0": Mt - m, "rate": M - m})


# --------------------------------------------------------------------------
# Rellich identity


@dataclass
class RellichResult:
    lhs: float
    rhs: float
    relative_gap: float
    flux_bound_ratio: float
    boundary_flux_sq: float


def inradius(grid: Grid) -> float:
    return min(0.5 * (grid.hi[a] - grid.lo[a]) for a in range(grid.dim) if not grid.periodic[a])


def _plateau(r, delta):
    """1 for ``r <= delta/2``, 0 for ``r >= delta``, quintic in between; with r-derivatives."""
    w = 0.5 * delta
    t = (r - w) / w
    return 1.0 - smoothstep(t), -smoothstep_d1(t) / w, -smoothstep_d2(t) / (w * w)


def _second_derivative(U, dx, axis, periodic):
    if periodic:
        return (np.roll(U, -1, axis) - 2 * U + np.roll(U, 1, axis)) / (dx * dx)
    return np.gradient(np.gradient(U, dx, axis=axis, edge_order=2), dx, axis=axis, edge_order=2)


def check_rellich(grid: Grid, V: ScalarField, h: float, u, delta: float, G=None,
                  profile: str = "plateau") -> RellichResult:
    """Both sides of ``int u [P, A] u = h^2 int_boundary (du/dn) A u``.

    ``A = sum_edges chi(r_e) d/dr_e`` with ``r_e`` the distance to each flat
    boundary piece and ``d/dr_e`` its inward derivative; on each piece the
    other terms are tangential and vanish for Dirichlet ``u``, so the right
    side is ``-chi(0) int |h du/dn|^2``.  For ``P = -h^2 Laplacian + V``,
    ``[P, chi d_r] u = -h^2 (chi'' u_r + 2 chi' u_rr) - chi V_r u``.
    ``profile="zero"`` takes ``chi = 0``.
    """
    if G is not None and not (isinstance(G, ConstantMetric) and np.allclose(G.M, np.eye(grid.dim))):
        raise ValueError("the Rellich check needs G = identity")
    if not 0 < delta <= inradius(grid):
        raise ValueError(f"delta={delta} exceeds the inradius {inradius(grid)}")
    U = grid.embed(np.asarray(u, dtype=float))
    X = grid.nodes
    Vg = V.grad(X)
    du = grid.gradient(U)
    Us = U.reshape(grid.shape)
    integrand = np.zeros(grid.n_nodes)
    near = np.zeros(grid.n_nodes, dtype=bool)
    pieces = grid.edges if grid.edges else grid.components
    flux_sq = 0.0
    for name, comp in pieces.items():
        a = int(comp.axis[0])
        s = int(comp.inward[0])
        r = X[:, a] - grid.lo[a] if s > 0 else grid.hi[a] - X[:, a]
        near |= r <= delta + 1e-12
        t = normal_trace(grid, name, U, h)
        flux_sq += boundary_integrate(grid, name, t * t)
        if profile == "zero":
            continue
        chi, d1, d2 = _plateau(r, delta)
        u_r = s * du[:, a]
        u_rr = _second_derivative(Us, grid.spacing[a], a, grid.periodic[a]).ravel()
        integrand += -h * h * U * (d2 * u_r + 2.0 * d1 * u_rr) - chi * s * Vg[:, a] * U * U
    lhs = integrate(grid, None, integrand)
    chi0 = 0.0 if profile == "zero" else 1.0
    rhs = -chi0 * flux_sq
    gap = 0.0 if rhs == 0 and lhs == 0 else abs(lhs - rhs) / max(abs(rhs), 1e-300)
    dens = U * U + h * h * np.sum(du * du, axis=1)
    mass = integrate(grid, Subregion(near, {"kind": "boundary-collar", "delta": delta}), dens)
    ratio = flux_sq / mass if mass > 0 else math.inf
    return RellichResult(float(lhs), float(rhs), float(gap), float(ratio), float(flux_sq))
