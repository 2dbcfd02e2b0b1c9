"""Characteristic-set sampling, weight certification and gamma calibration."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..geometry import ConstantMetric, ExpField, Grid, ScalarField, Subregion
from .symbols import conjugated_bracket


class CriticalPointError(ValueError):
    """The weight has a critical point where one is not allowed."""


class CalibrationError(RuntimeError):
    pass


GRAD_TOL = 1e-10


def _metric(G, dim):
    return ConstantMetric.identity(dim) if G is None else G


def char_radius_sq(G, V, phi, E, x):
    """``r^2 = phi'^T G phi' + E - V`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    G = _metric(G, phi.dim)
    dphi = phi.grad(x)
    return np.einsum("...i,...ij,...j->...", dphi, G(x), dphi) + E - V(x)


def _sample_batch(G, V, phi, E, x, count, rng):
    """Vectorized sampler over points ``x`` of shape (n, d).

    Returns ``xi`` of shape (n, count, d) and a mask of points whose fiber is
    nonempty.  In 1-D the fiber is ``{0}`` when ``r^2 == 0`` and empty otherwise.
    """
    n, d = x.shape
    G = _metric(G, d)
    Gx = G(x)
    dphi = phi.grad(x)
    gnorm = np.linalg.norm(dphi, axis=1)
    if np.any(gnorm <= GRAD_TOL):
        i = int(np.argmax(gnorm <= GRAD_TOL))
        raise CriticalPointError(f"critical point of weight at x = {x[i].tolist()}")
    b = np.einsum("nij,nj->ni", Gx, dphi)
    r2 = np.einsum("ni,ni->n", dphi, b) + E - V(x)
    if d == 1:
        ok = np.abs(r2) <= 1e-12 * np.maximum(1.0, np.abs(E) + np.abs(V(x)))
        return np.zeros((n, 1, 1)), ok
    ok = r2 >= 0
    z = rng.standard_normal((n, count, d))
    bb = np.einsum("ni,ni->n", b, b)
    z -= (np.einsum("nci,ni->nc", z, b) / bb[:, None])[..., None] * b[:, None, :]
    q = np.einsum("nci,nij,ncj->nc", z, Gx, z)
    scale = np.sqrt(np.maximum(r2, 0.0))[:, None] / np.sqrt(q)
    return z * scale[..., None], ok


def sample_char_set(G, V: ScalarField, phi: ScalarField, E: float, x, count: int, seed: int = 0):
    """Covectors ``xi`` over ``x`` with ``xi^T G phi' = 0`` and ``xi^T G xi = r^2``.

    Directions are seeded Gaussian draws projected onto the complement of
    ``G phi'`` and rescaled.  Empty when ``r^2 < 0``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rng = np.random.default_rng(seed)
    xi, ok = _sample_batch(G, V, phi, E, x[None, :], count, rng)
    if not ok[0]:
        return []
    return [v for v in xi[0]]


@dataclass
class Certificate:
    c_min: float
    certified: bool
    c_target: float
    gamma: float
    seed: int
    n_x: int
    n_xi: int
    n_char_points: int
    E_values: list
    argmin: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "c_min": self.c_min,
            "certified": self.certified,
            "c_target": self.c_target,
            "gamma": self.gamma,
            "seed": self.seed,
            "x_samples": self.n_x,
            "xi_samples": self.n_xi,
            "char_points": self.n_char_points,
            "E_values": self.E_values,
            "argmin": self.argmin,
        }


@dataclass
class CarlemanWeight:
    psi: ScalarField
    gamma: float
    phi: ExpField
    region: Subregion | None
    certificate: Certificate | None


def _region_points(grid: Grid, region: Subregion | None, x_samples, seed):
    mask = np.ones(grid.n_nodes, dtype=bool) if region is None else region.mask
    pts = grid.nodes[mask]
    if pts.shape[0] == 0:
        raise ValueError("empty certification region")
    if x_samples is None or x_samples >= pts.shape[0]:
        return pts
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(pts.shape[0], size=int(x_samples), replace=False))
    return pts[idx]


def certify_weight(G, V: ScalarField, psi: ScalarField, gamma: float, grid: Grid,
                   region: Subregion | None, E_range, x_samples=None, xi_samples: int = 8,
                   seed: int = 0, c_target: float = 1e-3) -> Certificate:
    """Minimum of ``{Re p_phi, Im p_phi}`` over sampled characteristic points.

    ``x`` runs over the region's grid nodes (or a seeded subset of
    ``x_samples``), ``E`` over the endpoints and midpoint of ``E_range``, and
    ``xi`` over ``xi_samples`` seeded char-set covectors per ``(x, E)``.  An
    empty characteristic set gives ``c_min = inf`` (the condition is vacuous).
    """
    a, b = (float(E_range[0]), float(E_range[-1]))
    Es = sorted({a, 0.5 * (a + b), b})
    x = _region_points(grid, region, x_samples, seed)
    gnorm = np.linalg.norm(psi.grad(x), axis=1)
    if np.any(gnorm <= GRAD_TOL):
        i = int(np.argmax(gnorm <= GRAD_TOL))
        raise CriticalPointError(f"critical point of weight at x = {x[i].tolist()}")
    phi = ExpField(psi, gamma)
    rng = np.random.default_rng(seed)
    c_min, arg, npts = np.inf, {}, 0
    for E in Es:
        xi, ok = _sample_batch(G, V, phi, E, x, xi_samples, rng)
        if not ok.any():
            continue
        xs = np.broadcast_to(x[ok][:, None, :], xi[ok].shape)
        br = conjugated_bracket(G, V, phi, xs, xi[ok])
        npts += br.size
        j = np.unravel_index(int(np.argmin(br)), br.shape)
        if br[j] < c_min:
            c_min = float(br[j])
            arg = {"x": xs[j].tolist(), "xi": xi[ok][j].tolist(), "E": E}
    certified = bool(c_min >= c_target * (1.0 - 1e-12))
    return Certificate(c_min, certified, float(c_target), float(gamma), int(seed), int(x.shape[0]),
                       int(xi_samples), int(npts), Es, arg)


def calibrate_gamma(G, V, psi, grid, region, E_range, c_target, x_samples=None, xi_samples=8,
                    seed=0, max_doublings=10, bisection_steps=8):
    """Smallest certifying power of two times ``gamma_0 = 1``, then bisection.

    The bisection runs between the last failing and first passing value and
    returns the passing end, so a power of two that is already minimal comes
    back unchanged.
    """
    def passes(g):
        return certify_weight(G, V, psi, g, grid, region, E_range, x_samples, xi_samples,
                              seed, c_target).certified

    gamma = 1.0
    if passes(gamma):
        return gamma
    for _ in range(max_doublings):
        lo, gamma = gamma, 2.0 * gamma
        if passes(gamma):
            hi = gamma
            for _ in range(bisection_steps):
                mid = 0.5 * (lo + hi)
                if passes(mid):
                    hi = mid
                else:
                    lo = mid
            return hi
    raise CalibrationError(
        f"no certification up to gamma = 2^{max_doublings}: weight family inadequate for c_target={c_target}"
    )
