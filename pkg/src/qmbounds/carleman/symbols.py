"""Principal symbols, their conjugated versions and Poisson brackets.

All evaluators broadcast over leading axes: ``x`` and ``xi`` have a trailing
axis of length ``dim``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..geometry import ConstantMetric, ExpField, MetricField, ScalarField


class OutsideDomainError(ValueError):
    pass


def _check_bounds(bounds, x):
    if bounds is None:
        return
    lo, hi = (np.asarray(b, dtype=float) for b in bounds)
    if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
        raise OutsideDomainError("point outside coefficient domain")


def trilinear(dG, a, b, c):
    """``G'(a, b, c) = sum_k c_k a^T (d_k G) b`` with ``dG[..., i, j, k]``."""
    return np.einsum("...i,...ijk,...j,...k->...", a, dG, b, c)


class Symbol:
    """A real function on phase space with ``value``, ``dx`` and ``dxi``."""

    bounds = None

    def value(self, x, xi):
        raise NotImplementedError

    def dx(self, x, xi):
        raise NotImplementedError

    def dxi(self, x, xi):
        raise NotImplementedError


class CoordinateSymbol(Symbol):
    """The coordinate function ``x_i`` (``which='x'``) or ``xi_i`` (``which='xi'``)."""

    def __init__(self, which, index, dim):
        if which not in ("x", "xi"):
            raise ValueError("which must be 'x' or 'xi'")
        self.which, self.index, self.dim = which, int(index), int(dim)

    def value(self, x, xi):
        return (x if self.which == "x" else xi)[..., self.index]

    def _unit(self, like, hit):
        out = np.zeros(np.broadcast_shapes(like.shape))
        if hit:
            out[..., self.index] = 1.0
        return out

    def dx(self, x, xi):
        return self._unit(np.asarray(x, dtype=float), self.which == "x")

    def dxi(self, x, xi):
        return self._unit(np.asarray(xi, dtype=float), self.which == "xi")


class _ConjugatedPart(Symbol):
    def __init__(self, G: MetricField | None, V: ScalarField, phi: ScalarField, bounds=None):
        self.G = ConstantMetric.identity(phi.dim) if G is None else G
        self.V = V
        self.phi = phi
        self.bounds = bounds

    def _parts(self, x):
        x = np.asarray(x, dtype=float)
        _check_bounds(self.bounds, x)
        return self.G(x), self.G.deriv(x), self.phi.grad(x), self.phi.hess(x)


class RePphi(_ConjugatedPart):
    """``xi^T G xi - phi'^T G phi' + V``."""

    def value(self, x, xi):
        G, _, dphi, _ = self._parts(x)
        q = np.einsum("...i,...ij,...j->...", xi, G, xi)
        return q - np.einsum("...i,...ij,...j->...", dphi, G, dphi) + self.V(x)

    def dx(self, x, xi):
        G, dG, dphi, ddphi = self._parts(x)
        out = np.einsum("...i,...ijk,...j->...k", xi, dG, xi)
        out -= 2.0 * np.einsum("...ik,...ij,...j->...k", ddphi, G, dphi)
        out -= np.einsum("...i,...ijk,...j->...k", dphi, dG, dphi)
        return out + self.V.grad(x)

    def dxi(self, x, xi):
        G = self.G(np.asarray(x, dtype=float))
        return 2.0 * np.einsum("...ij,...j->...i", G, xi)


class ImPphi(_ConjugatedPart):
    """``2 xi^T G phi'``."""

    def value(self, x, xi):
        G, _, dphi, _ = self._parts(x)
        return 2.0 * np.einsum("...i,...ij,...j->...", xi, G, dphi)

    def dx(self, x, xi):
        G, dG, dphi, ddphi = self._parts(x)
        out = 2.0 * np.einsum("...i,...ijk,...j->...k", xi, dG, dphi)
        return out + 2.0 * np.einsum("...ik,...ij,...j->...k", ddphi, G, xi)

    def dxi(self, x, xi):
        G, _, dphi, _ = self._parts(x)
        return 2.0 * np.einsum("...ij,...j->...i", G, dphi)


def poisson_bracket(f: Symbol, g: Symbol, x, xi):
    """``{f, g} = sum_j (d_xi_j f  d_x_j g - d_x_j f  d_xi_j g)``."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return np.sum(f.dxi(x, xi) * g.dx(x, xi) - f.dx(x, xi) * g.dxi(x, xi), axis=-1)


def conjugated_bracket(G, V, phi, x, xi):
    """``{Re p_phi, Im p_phi}`` through the generic bracket."""
    return poisson_bracket(RePphi(G, V, phi), ImPphi(G, V, phi), x, xi)


def complex_bracket(G, V, phi, x, xi):
    """``(1/i) {conj(p_phi), p_phi}`` evaluated in complex arithmetic.

    With ``zeta = xi + i phi'``: ``d_xi p = 2 G zeta`` and
    ``d_x_k p = zeta^T (d_k G) zeta + d_k V + 2i (G zeta) . phi''[:, k]``.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    G = ConstantMetric.identity(phi.dim) if G is None else G
    Gx, dG = G(x), G.deriv(x)
    zeta = xi + 1j * phi.grad(x)
    Gz = np.einsum("...ij,...j->...i", Gx, zeta)
    dxi_p = 2.0 * Gz
    dx_p = (np.einsum("...i,...ijk,...j->...k", zeta, dG, zeta) + V.grad(x)
            + 2j * np.einsum("...i,...ik->...k", Gz, phi.hess(x)))
    dxi_pbar, dx_pbar = np.conj(dxi_p), np.conj(dx_p)
    br = np.sum(dxi_pbar * dx_p - dx_pbar * dxi_p, axis=-1)
    return br / 1j


def bracket_closed_form(G, V: ScalarField, psi: ScalarField, gamma: float, x, xi):
    """``{Re p_phi, Im p_phi}`` for ``phi = exp(gamma psi)`` expanded in ``psi``.

    Term by term, with ``e = exp(gamma psi)``::

        4 e^3 (gamma^4 (psi'G psi')^2 + gamma^3 psi'G psi''G psi')
        + 2 gamma^3 e^3 G'(psi', psi', G psi')
        + 4 gamma^2 e (psi'G xi)^2 + 4 gamma e xi^T G psi'' G xi
        + 4 gamma e G'(psi', xi, G xi) - 2 gamma e G'(xi, xi, G psi')
        - 2 gamma e V'^T G psi'

    The ``(psi'G xi)^2`` term vanishes on the characteristic set; it is kept so
    the expansion is exact at every phase-space point.
    """
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    G = ConstantMetric.identity(psi.dim) if G is None else G
    g = float(gamma)
    Gx, dG = G(x), G.deriv(x)
    e = np.exp(g * psi(x))
    dpsi, ddpsi = psi.grad(x), psi.hess(x)
    Gdpsi = np.einsum("...ij,...j->...i", Gx, dpsi)
    Gxi = np.einsum("...ij,...j->...i", Gx, xi)
    q = np.einsum("...i,...i->...", dpsi, Gdpsi)
    lead = 4.0 * e**3 * (g**4 * q * q + g**3 * np.einsum("...i,...ij,...j->...", Gdpsi, ddpsi, Gdpsi))
    metric3 = 2.0 * g**3 * e**3 * trilinear(dG, dpsi, dpsi, Gdpsi)
    xi_terms = (4.0 * g * g * e * np.einsum("...i,...i->...", Gdpsi, xi) ** 2
                + 4.0 * g * e * np.einsum("...i,...ij,...j->...", Gxi, ddpsi, Gxi))
    metric_xi = 4.0 * g * e * trilinear(dG, dpsi, xi, Gxi) - 2.0 * g * e * trilinear(dG, xi, xi, Gdpsi)
    potential = -2.0 * g * e * np.einsum("...i,...i->...", V.grad(x), Gdpsi)
    return lead + metric3 + xi_terms + metric_xi + potential


@dataclass
class SymbolPoint:
    x: np.ndarray
    xi: np.ndarray
    re: float
    im: float
    re_dx: np.ndarray
    re_dxi: np.ndarray
    im_dx: np.ndarray
    im_dxi: np.ndarray


def symbol_point(G, V, phi, x, xi) -> SymbolPoint:
    re, im = RePphi(G, V, phi), ImPphi(G, V, phi)
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return SymbolPoint(x, xi, float(re.value(x, xi)), float(im.value(x, xi)),
                       re.dx(x, xi), re.dxi(x, xi), im.dx(x, xi), im.dxi(x, xi))


def weight(psi: ScalarField, gamma: float) -> ExpField:
    return ExpField(psi, gamma)
