"""Zonal harmonics ``sin(theta)^n e^{i n phi}`` on the sphere, computed in the log domain."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate as _quad

from .rates import RateFit, fit_log_rate

LOG_4PI = math.log(4.0 * math.pi)


@dataclass(frozen=True)
class ZonalMode:
    n: int
    log_norm_sq: float
    eigenvalue: int

    @property
    def h(self):
        return 1.0 / math.sqrt(self.eigenvalue) if self.eigenvalue else math.inf


def _check_n(n):
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a nonnegative integer, got {n}")
    return int(n)


def zonal_norm_exact(n: int) -> float:
    """``log int_{S^2} |f_n|^2 = log(4^{n+1} pi (n!)^2 / (2n+1)!)`` via log-gamma."""
    n = _check_n(n)
    return (n + 1) * math.log(4.0) + math.log(math.pi) + 2.0 * math.lgamma(n + 1) - math.lgamma(2 * n + 2)


def zonal_mode(n: int) -> ZonalMode:
    n = _check_n(n)
    return ZonalMode(n, zonal_norm_exact(n), n * (n + 1))


def _log_sin_power_integral(power: int, upper: float) -> float:
    """``log int_0^upper sin(t)^power dt`` for ``0 < upper <= pi/2``.

    The integrand is rescaled by ``sin(upper)^power`` so the quadrature sees
    values in ``[0, 1]`` whatever the power.
    """
    s = math.sin(upper)
    ls = math.log(s)

    def f(t):
        return math.exp(power * (math.log(math.sin(t)) - ls)) if t > 0 else 0.0

    # the integrand is concentrated within ~1/power of the upper limit
    width = min(upper, 50.0 / max(power, 1))
    pts = [upper - width] if width < upper else None
    val, _ = _quad.quad(f, 0.0, upper, epsabs=0.0, epsrel=1e-12, limit=400, points=pts)
    return power * ls + math.log(val)


def zonal_norm_quadrature(n: int) -> float:
    """Quadrature oracle: ``log(4 pi int_0^{pi/2} sin^{2n+1})``."""
    n = _check_n(n)
    return LOG_4PI + _log_sin_power_integral(2 * n + 1, 0.5 * math.pi)


def zonal_asymptotic(n: int) -> float:
    """Stirling form ``4 pi^{3/2} n^{1/2} / (2n+1)`` of the squared norm."""
    n = _check_n(n)
    if n < 1:
        raise ValueError("the asymptotic form needs n >= 1")
    return 4.0 * math.pi ** 1.5 * math.sqrt(n) / (2 * n + 1)


def cap_mass(n: int, s0: float) -> float:
    """``log`` of the mass of ``|f_n|^2`` on both polar caps ``{sin(theta) <= s0}``."""
    n = _check_n(n)
    if not 0.0 < s0 < 1.0:
        raise ValueError(f"s0 must lie in (0, 1), got {s0}")
    return LOG_4PI + _log_sin_power_integral(2 * n + 1, math.asin(s0))


def zonal_rate_check(n_list, s0: float) -> RateFit:
    """Fit ``log ||F_n||_{L^2(cap)} = c - alpha / h`` with ``h = (n(n+1))^{-1/2}``.

    ``F_n`` is the normalized zonal harmonic, so the fitted quantity is
    ``(cap_mass - log norm^2) / 2``.  The values are exact quadratures in the
    log domain and are not subject to the amplitude floor.
    """
    ns = [_check_n(n) for n in n_list]
    if len(ns) < 4:
        raise ValueError("zonal_rate_check needs >= 4 values of n")
    if any(b <= a for a, b in zip(ns, ns[1:])) or ns[0] < 1:
        raise ValueError("n-list must be increasing and start at n >= 1")
    pairs = [(1.0 / math.sqrt(n * (n + 1)), 0.5 * (cap_mass(n, s0) - zonal_norm_exact(n))) for n in ns]
    return fit_log_rate(pairs)


def laplacian_terms(n: int, theta, phi):
    """The three terms of the spherical Laplacian applied to ``f_n``, analytically.

    Returns ``(d2_theta f, cot(theta) d_theta f, sin(theta)^-2 d2_phi f, f)``.
    """
    s, c = np.sin(theta), np.cos(theta)
    e = np.exp(1j * n * phi)
    f = s ** n * e
    if n == 0:
        z = np.zeros_like(f)
        return z, z, z, f
    d1 = n * s ** (n - 1) * c * e
    d2 = (n * (n - 1) * s ** (n - 2) * c * c - n * s ** n) * e
    return d2, c / s * d1, -(n * n) * f / (s * s), f


def verify_eigen_relation(n: int, samples: int = 100, seed: int = 0) -> float:
    """Max of ``|Delta f_n + n(n+1) f_n| / |n(n+1) f_n|`` over seeded samples with ``sin(theta) >= 0.1``."""
    n = _check_n(n)
    rng = np.random.default_rng(seed)
    t0 = math.asin(0.1)
    theta = rng.uniform(t0, math.pi - t0, samples)
    phi = rng.uniform(0.0, 2 * math.pi, samples)
    a, b, c, f = laplacian_terms(n, theta, phi)
    lap = a + b + c
    if n == 0:
        return float(np.max(np.abs(lap)))
    lam = n * (n + 1)
    return float(np.max(np.abs(lap + lam * f) / np.abs(lam * f)))
