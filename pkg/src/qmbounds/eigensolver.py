"""Eigenpairs of the symmetric Dirichlet operator nearest a target energy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from .operators import AssembledOperator, l2_norm, residual

DENSE_THRESHOLD = 2000


class EigenSolveError(RuntimeError):
    """Raised when the iterative solver fails; carries iteration diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class EigenPair:
    eigenvalue: float
    vector: np.ndarray = field(repr=False)   # interior values, unit L^2 norm under quadrature
    residual: float
    h: float


def _normalize(op, v):
    v = v / l2_norm(op.grid, None, v)
    # deterministic sign: largest-magnitude entry positive
    i = int(np.argmax(np.abs(v)))
    return v if v[i] >= 0 else -v


def eigs_near(op: AssembledOperator, E_target: float, k: int = 1, seed: int = 0,
              dense_threshold: int = DENSE_THRESHOLD, maxiter: int | None = None, tol: float = 0.0):
    """``k`` eigenpairs of ``op`` with eigenvalues closest to ``E_target``.

    Dense symmetric solve up to ``dense_threshold`` interior nodes; above it,
    shift-invert Lanczos about ``E_target`` with a seeded start vector.
    Returned pairs are sorted by ``|lambda - E_target|``.
    """
    if not op.symmetric:
        raise ValueError("eigs_near needs a symmetric operator")
    n = op.matrix.shape[0]
    if k < 1 or k >= n:
        raise ValueError(f"k must satisfy 1 <= k < {n}, got {k}")
    if n <= dense_threshold:
        w, V = la.eigh(op.matrix.toarray())
        order = np.argsort(np.abs(w - E_target), kind="stable")[:k]
        w, V = w[order], V[:, order]
    else:
        v0 = np.random.default_rng(seed).standard_normal(n)
        try:
            w, V = sla.eigsh(op.matrix.tocsc(), k=k, sigma=E_target, which="LM", v0=v0,
                             maxiter=maxiter, tol=tol)
        except sla.ArpackNoConvergence as exc:
            raise EigenSolveError(
                f"shift-invert Lanczos did not converge for {k} pairs near {E_target}",
                {"converged": len(exc.eigenvalues), "maxiter": maxiter, "n": n},
            ) from exc
        order = np.argsort(np.abs(w - E_target), kind="stable")
        w, V = w[order], V[:, order]
    out = []
    for lam, v in zip(w, V.T):
        v = _normalize(op, v)
        out.append(EigenPair(float(lam), v, residual(op, v, float(lam)), op.h))
    return out


def rayleigh_quotient(op: AssembledOperator, v) -> float:
    return float(v @ (op.matrix @ v) / (v @ v))
