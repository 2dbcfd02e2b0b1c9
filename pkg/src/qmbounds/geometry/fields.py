"""Analytic coefficient fields with exact first and second derivatives.

Every field is evaluated on arrays of points whose last axis is the spatial
dimension. ``f(x)`` returns shape ``x.shape[:-1]``, ``f.grad(x)`` appends one
axis of length ``dim`` and ``f.hess(x)`` appends two.

Fields carry a ``descriptor`` dict so that experiment configs can rebuild
them with :func:`field_from_descriptor`.
"""

from __future__ import annotations

import numpy as np

from .._smooth import smoothstep, smoothstep_d1, smoothstep_d2


def _pts(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != dim:
        raise ValueError(f"points must have trailing dimension {dim}, got shape {x.shape}")
    return x


class ScalarField:
    """Base class. Subclasses implement ``_eval``, ``_grad`` and ``_hess``."""

    dim: int = 1
    descriptor: dict = {}

    def __call__(self, x):
        return self._eval(_pts(x, self.dim))

    def grad(self, x):
        return self._grad(_pts(x, self.dim))

    def hess(self, x):
        return self._hess(_pts(x, self.dim))

    def laplacian(self, x):
        return np.trace(self.hess(x), axis1=-2, axis2=-1)

    def __add__(self, other):
        return SumField([self, other])

    def __repr__(self):
        return f"{type(self).__name__}({self.descriptor})"


class Constant(ScalarField):
    def __init__(self, value, dim=1):
        self.value = float(value)
        self.dim = int(dim)
        self.descriptor = {"kind": "constant", "value": self.value, "dim": self.dim}

    def _eval(self, x):
        return np.full(x.shape[:-1], self.value)

    def _grad(self, x):
        return np.zeros(x.shape)

    def _hess(self, x):
        return np.zeros(x.shape + (self.dim,))


class Linear(ScalarField):
    """``coef . x + offset``."""

    def __init__(self, coef, offset=0.0):
        self.coef = np.atleast_1d(np.asarray(coef, dtype=float))
        self.offset = float(offset)
        self.dim = self.coef.size
        self.descriptor = {"kind": "linear", "coef": self.coef.tolist(), "offset": self.offset}

    def _eval(self, x):
        return x @ self.coef + self.offset

    def _grad(self, x):
        return np.broadcast_to(self.coef, x.shape).copy()

    def _hess(self, x):
        return np.zeros(x.shape + (self.dim,))


class Quadratic(ScalarField):
    """``(x-c)^T A (x-c) + b.(x-c) + offset`` with ``A`` symmetrized."""

    def __init__(self, matrix, linear=None, offset=0.0, center=None):
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.A = 0.5 * (A + A.T)
        self.dim = self.A.shape[0]
        self.b = np.zeros(self.dim) if linear is None else np.asarray(linear, dtype=float)
        self.c = np.zeros(self.dim) if center is None else np.asarray(center, dtype=float)
        self.offset = float(offset)
        self.descriptor = {
            "kind": "quadratic",
            "matrix": self.A.tolist(),
            "linear": self.b.tolist(),
            "offset": self.offset,
            "center": self.c.tolist(),
        }

    def _eval(self, x):
        y = x - self.c
        return np.einsum("...i,ij,...j->...", y, self.A, y) + y @ self.b + self.offset

    def _grad(self, x):
        return 2.0 * (x - self.c) @ self.A + self.b

    def _hess(self, x):
        return np.broadcast_to(2.0 * self.A, x.shape + (self.dim,)).copy()


class Polynomial1D(ScalarField):
    """Polynomial ``sum_k coeffs[k] * x[axis]**k`` in one coordinate."""

    def __init__(self, coeffs, axis=0, dim=1):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.axis = int(axis)
        self.dim = int(dim)
        self._p = np.polynomial.Polynomial(self.coeffs)
        self._dp = self._p.deriv(1)
        self._ddp = self._p.deriv(2)
        self.descriptor = {
            "kind": "polynomial",
            "coeffs": self.coeffs.tolist(),
            "axis": self.axis,
            "dim": self.dim,
        }

    def _eval(self, x):
        return self._p(x[..., self.axis])

    def _grad(self, x):
        g = np.zeros(x.shape)
        g[..., self.axis] = self._dp(x[..., self.axis])
        return g

    def _hess(self, x):
        H = np.zeros(x.shape + (self.dim,))
        H[..., self.axis, self.axis] = self._ddp(x[..., self.axis])
        return H


class ExpField(ScalarField):
    """``exp(gamma * psi)``; the convexified Carleman weight."""

    def __init__(self, psi: ScalarField, gamma: float):
        self.psi = psi
        self.gamma = float(gamma)
        self.dim = psi.dim
        self.descriptor = {"kind": "exp", "gamma": self.gamma, "field": psi.descriptor}

    def _eval(self, x):
        return np.exp(self.gamma * self.psi(x))

    def _grad(self, x):
        return (self.gamma * np.exp(self.gamma * self.psi(x)))[..., None] * self.psi.grad(x)

    def _hess(self, x):
        g = self.gamma
        e = np.exp(g * self.psi(x))[..., None, None]
        dpsi = self.psi.grad(x)
        return e * (g * g * dpsi[..., :, None] * dpsi[..., None, :] + g * self.psi.hess(x))


class SumField(ScalarField):
    def __init__(self, terms, weights=None):
        self.terms = list(terms)
        self.dim = self.terms[0].dim
        if any(t.dim != self.dim for t in self.terms):
            raise ValueError("all summands must share a dimension")
        self.weights = [1.0] * len(self.terms) if weights is None else [float(w) for w in weights]
        self.descriptor = {
            "kind": "sum",
            "terms": [t.descriptor for t in self.terms],
            "weights": self.weights,
        }

    def _eval(self, x):
        return sum(w * t(x) for w, t in zip(self.weights, self.terms))

    def _grad(self, x):
        return sum(w * t.grad(x) for w, t in zip(self.weights, self.terms))

    def _hess(self, x):
        return sum(w * t.hess(x) for w, t in zip(self.weights, self.terms))


class Gaussian(ScalarField):
    """``amplitude * exp(-sum_i (x_i - c_i)^2 / (2 sigma_i^2))``."""

    def __init__(self, center, sigma, amplitude=1.0):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.dim = self.center.size
        self.sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (self.dim,)).copy()
        self.amplitude = float(amplitude)
        self.descriptor = {
            "kind": "gaussian",
            "center": self.center.tolist(),
            "sigma": self.sigma.tolist(),
            "amplitude": self.amplitude,
        }

    def _eval(self, x):
        z = (x - self.center) / self.sigma
        return self.amplitude * np.exp(-0.5 * np.sum(z * z, axis=-1))

    def _grad(self, x):
        z = (x - self.center) / self.sigma
        return -self._eval(x)[..., None] * z / self.sigma

    def _hess(self, x):
        z = (x - self.center) / self.sigma
        v = self._eval(x)[..., None, None]
        dz = z / self.sigma
        return v * (dz[..., :, None] * dz[..., None, :] - np.diag(1.0 / self.sigma**2))


class AnnulusDimple(ScalarField):
    """Negative dimple on the annulus chart ``(r, theta)``.

    ``-depth * exp(-(r - r_c)^2 / (2 sigma_r^2) + (cos(theta - theta_c) - 1) / kappa)``;
    periodic in ``theta``.  Added to ``-r`` it produces a saddle/extremum pair
    on the ray ``theta = theta_c`` once ``depth / sigma_r`` exceeds ``exp(1/2)``.
    """

    dim = 2

    def __init__(self, depth, r_center, sigma_r, theta_center, kappa):
        self.depth = float(depth)
        self.rc = float(r_center)
        self.sr = float(sigma_r)
        self.tc = float(theta_center)
        self.kappa = float(kappa)
        self.descriptor = {
            "kind": "annulus_dimple",
            "depth": self.depth,
            "r_center": self.rc,
            "sigma_r": self.sr,
            "theta_center": self.tc,
            "kappa": self.kappa,
        }

    def _parts(self, x):
        dr = x[..., 0] - self.rc
        dt = x[..., 1] - self.tc
        e = -self.depth * np.exp(-0.5 * dr**2 / self.sr**2 + (np.cos(dt) - 1.0) / self.kappa)
        return e, dr, dt

    def _eval(self, x):
        return self._parts(x)[0]

    def _grad(self, x):
        e, dr, dt = self._parts(x)
        g = np.empty(x.shape)
        g[..., 0] = e * (-dr / self.sr**2)
        g[..., 1] = e * (-np.sin(dt) / self.kappa)
        return g

    def _hess(self, x):
        e, dr, dt = self._parts(x)
        ar = -dr / self.sr**2
        at = -np.sin(dt) / self.kappa
        H = np.empty(x.shape + (2,))
        H[..., 0, 0] = e * (ar * ar - 1.0 / self.sr**2)
        H[..., 1, 1] = e * (at * at - np.cos(dt) / self.kappa)
        H[..., 0, 1] = H[..., 1, 0] = e * ar * at
        return H


class SineProduct(ScalarField):
    """``amplitude * prod_i sin(k_i * pi * (x_i - a_i) / L_i)``."""

    def __init__(self, lower, length, modes, amplitude=1.0):
        self.a = np.atleast_1d(np.asarray(lower, dtype=float))
        self.dim = self.a.size
        self.L = np.broadcast_to(np.asarray(length, dtype=float), (self.dim,)).copy()
        self.k = np.broadcast_to(np.asarray(modes, dtype=float), (self.dim,)).copy()
        self.amplitude = float(amplitude)
        self.descriptor = {
            "kind": "sines",
            "lower": self.a.tolist(),
            "length": self.L.tolist(),
            "modes": self.k.tolist(),
            "amplitude": self.amplitude,
        }

    def _factors(self, x):
        w = self.k * np.pi / self.L
        t = w * (x - self.a)
        return np.sin(t), w * np.cos(t), -w * w * np.sin(t)

    def _eval(self, x):
        s, _, _ = self._factors(x)
        return self.amplitude * np.prod(s, axis=-1)

    def _grad(self, x):
        s, ds, _ = self._factors(x)
        g = np.empty(x.shape)
        for i in range(self.dim):
            f = ds[..., i]
            for j in range(self.dim):
                if j != i:
                    f = f * s[..., j]
            g[..., i] = f
        return self.amplitude * g

    def _hess(self, x):
        s, ds, dds = self._factors(x)
        H = np.empty(x.shape + (self.dim,))
        for i in range(self.dim):
            for j in range(self.dim):
                f = np.ones(x.shape[:-1])
                for m in range(self.dim):
                    if i == j == m:
                        f = f * dds[..., m]
                    elif m in (i, j):
                        f = f * ds[..., m]
                    else:
                        f = f * s[..., m]
                H[..., i, j] = f
        return self.amplitude * H


class BoxCutoff(ScalarField):
    """Tensor product of one-sided quintic smoothsteps.

    Equal to 1 on the inner box, 0 outside the outer box; each side has its own
    transition width so the boxes need not be concentric.
    """

    def __init__(self, inner_lo, inner_hi, outer_lo, outer_hi):
        self.ilo = np.atleast_1d(np.asarray(inner_lo, dtype=float))
        self.ihi = np.atleast_1d(np.asarray(inner_hi, dtype=float))
        self.olo = np.atleast_1d(np.asarray(outer_lo, dtype=float))
        self.ohi = np.atleast_1d(np.asarray(outer_hi, dtype=float))
        self.dim = self.ilo.size
        if np.any(self.olo >= self.ilo) or np.any(self.ihi >= self.ohi):
            raise ValueError("inner box must lie strictly inside the outer box")
        self.descriptor = {
            "kind": "box_cutoff",
            "inner_lo": self.ilo.tolist(),
            "inner_hi": self.ihi.tolist(),
            "outer_lo": self.olo.tolist(),
            "outer_hi": self.ohi.tolist(),
        }

    def _axis_factors(self, x):
        # per axis: value, first and second derivative of the 1-D profile
        wl = self.ilo - self.olo
        wh = self.ohi - self.ihi
        tl = (x - self.olo) / wl
        th = (self.ohi - x) / wh
        f = smoothstep(tl) * smoothstep(th)
        df = smoothstep_d1(tl) / wl * smoothstep(th) - smoothstep(tl) * smoothstep_d1(th) / wh
        ddf = (
            smoothstep_d2(tl) / wl**2 * smoothstep(th)
            - 2.0 * smoothstep_d1(tl) / wl * smoothstep_d1(th) / wh
            + smoothstep(tl) * smoothstep_d2(th) / wh**2
        )
        return f, df, ddf

    def _eval(self, x):
        f, _, _ = self._axis_factors(x)
        return np.prod(f, axis=-1)

    def _grad(self, x):
        f, df, _ = self._axis_factors(x)
        g = np.empty(x.shape)
        for i in range(self.dim):
            g[..., i] = df[..., i] * np.prod(np.delete(f, i, axis=-1), axis=-1)
        return g

    def _hess(self, x):
        f, df, ddf = self._axis_factors(x)
        H = np.empty(x.shape + (self.dim,))
        for i in range(self.dim):
            for j in range(self.dim):
                if i == j:
                    H[..., i, i] = ddf[..., i] * np.prod(np.delete(f, i, axis=-1), axis=-1)
                else:
                    rest = np.prod(np.delete(f, [i, j], axis=-1), axis=-1)
                    H[..., i, j] = df[..., i] * df[..., j] * rest
        return H


class BallCutoff(ScalarField):
    """Radial smoothstep: 1 for ``|x-c| <= r_in``, 0 for ``|x-c| >= r_out``."""

    def __init__(self, center, r_in, r_out):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.dim = self.center.size
        self.r_in = float(r_in)
        self.r_out = float(r_out)
        if not 0.0 < self.r_in < self.r_out:
            raise ValueError("need 0 < r_in < r_out")
        self.descriptor = {
            "kind": "ball_cutoff",
            "center": self.center.tolist(),
            "r_in": self.r_in,
            "r_out": self.r_out,
        }

    def _radial(self, x):
        y = x - self.center
        r = np.sqrt(np.sum(y * y, axis=-1))
        w = self.r_out - self.r_in
        t = (self.r_out - r) / w
        return y, r, w, t

    def _eval(self, x):
        _, _, _, t = self._radial(x)
        return smoothstep(t)

    def _grad(self, x):
        y, r, w, t = self._radial(x)
        rs = np.where(r > 0, r, 1.0)
        return (-smoothstep_d1(t) / w / rs)[..., None] * y

    def _hess(self, x):
        y, r, w, t = self._radial(x)
        rs = np.where(r > 0, r, 1.0)[..., None, None]
        n = y / rs[..., 0]
        d1 = (-smoothstep_d1(t) / w)[..., None, None]
        d2 = (smoothstep_d2(t) / w**2)[..., None, None]
        nn = n[..., :, None] * n[..., None, :]
        eye = np.eye(self.dim)
        return d2 * nn + d1 * (eye - nn) / rs


class CallableField(ScalarField):
    """Field from user callables; used for ad-hoc tests and negative controls."""

    def __init__(self, f, grad, hess, dim, name="callable"):
        self._f, self._g, self._h = f, grad, hess
        self.dim = int(dim)
        self.descriptor = {"kind": "callable", "name": name, "dim": self.dim}

    def _eval(self, x):
        return np.asarray(self._f(x), dtype=float)

    def _grad(self, x):
        return np.asarray(self._g(x), dtype=float)

    def _hess(self, x):
        return np.asarray(self._h(x), dtype=float)


# --------------------------------------------------------------------------
# metric fields G = (g^{ij})


class MetricField:
    """Symmetric positive definite matrix field ``g^{ij}(x)``."""

    dim: int = 1
    descriptor: dict = {}

    def __call__(self, x):
        x = _pts(x, self.dim)
        return self._eval(x)

    def deriv(self, x, axis=None):
        """``d g^{ij} / d x^axis``; with ``axis=None`` the full stack, last axis = k."""
        x = _pts(x, self.dim)
        D = self._deriv(x)
        return D if axis is None else D[..., axis]

    def check_spd(self, x):
        G = self(x).reshape(-1, self.dim, self.dim)
        if not np.allclose(G, np.swapaxes(G, -1, -2), rtol=0, atol=1e-12 * max(1.0, np.abs(G).max())):
            raise ValueError("metric sample is not symmetric")
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError as exc:
            raise ValueError("metric sample is not positive definite") from exc

    @property
    def is_constant(self):
        return False


class ConstantMetric(MetricField):
    def __init__(self, matrix):
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.M = M
        self.dim = M.shape[0]
        self.descriptor = {"kind": "constant", "matrix": M.tolist()}
        self.check_spd(np.zeros((1, self.dim)))

    @classmethod
    def identity(cls, dim):
        return cls(np.eye(dim))

    @property
    def is_constant(self):
        return True

    def _eval(self, x):
        return np.broadcast_to(self.M, x.shape[:-1] + self.M.shape).copy()

    def _deriv(self, x):
        return np.zeros(x.shape[:-1] + self.M.shape + (self.dim,))


class TrigMetric(MetricField):
    """``G(x) = base + sum_k sin(freq_k . x + phase_k) S_k`` with symmetric ``S_k``."""

    def __init__(self, base, terms):
        self.base = np.atleast_2d(np.asarray(base, dtype=float))
        self.dim = self.base.shape[0]
        self.freqs = np.array([np.asarray(t["freq"], dtype=float) for t in terms]).reshape(-1, self.dim)
        self.phases = np.array([float(t.get("phase", 0.0)) for t in terms])
        S = np.array([np.asarray(t["matrix"], dtype=float) for t in terms]).reshape(-1, self.dim, self.dim)
        self.S = 0.5 * (S + np.swapaxes(S, 1, 2))
        self.descriptor = {
            "kind": "trig",
            "base": self.base.tolist(),
            "terms": [
                {"freq": f.tolist(), "phase": float(p), "matrix": s.tolist()}
                for f, p, s in zip(self.freqs, self.phases, self.S)
            ],
        }

    def _eval(self, x):
        arg = x @ self.freqs.T + self.phases
        return self.base + np.einsum("...k,kij->...ij", np.sin(arg), self.S)

    def _deriv(self, x):
        arg = x @ self.freqs.T + self.phases
        return np.einsum("...k,kij,km->...ijm", np.cos(arg), self.S, self.freqs)


# --------------------------------------------------------------------------
# descriptors


def field_from_descriptor(desc: dict) -> ScalarField:
    """Rebuild a :class:`ScalarField` from its descriptor dict."""
    d = dict(desc)
    kind = d.pop("kind")
    if kind == "constant":
        return Constant(d["value"], d.get("dim", 1))
    if kind == "linear":
        return Linear(d["coef"], d.get("offset", 0.0))
    if kind == "quadratic":
        return Quadratic(d["matrix"], d.get("linear"), d.get("offset", 0.0), d.get("center"))
    if kind == "polynomial":
        return Polynomial1D(d["coeffs"], d.get("axis", 0), d.get("dim", 1))
    if kind == "exp":
        return ExpField(field_from_descriptor(d["field"]), d["gamma"])
    if kind == "sum":
        return SumField([field_from_descriptor(t) for t in d["terms"]], d.get("weights"))
    if kind == "gaussian":
        return Gaussian(d["center"], d["sigma"], d.get("amplitude", 1.0))
    if kind == "annulus_dimple":
        return AnnulusDimple(d["depth"], d["r_center"], d["sigma_r"], d["theta_center"], d["kappa"])
    if kind == "sines":
        return SineProduct(d["lower"], d["length"], d["modes"], d.get("amplitude", 1.0))
    if kind == "box_cutoff":
        return BoxCutoff(d["inner_lo"], d["inner_hi"], d["outer_lo"], d["outer_hi"])
    if kind == "ball_cutoff":
        return BallCutoff(d["center"], d["r_in"], d["r_out"])
    raise ValueError(f"unknown field kind {kind!r}")


def metric_from_descriptor(desc: dict, dim: int | None = None) -> MetricField:
    d = dict(desc)
    kind = d.pop("kind")
    if kind == "identity":
        return ConstantMetric.identity(dim if dim is not None else d["dim"])
    if kind == "constant":
        return ConstantMetric(d["matrix"])
    if kind == "trig":
        return TrigMetric(d["base"], d["terms"])
    raise ValueError(f"unknown metric kind {kind!r}")
