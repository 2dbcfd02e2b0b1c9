"""Hot loops: grid-graph shortest paths and bump-field flows.

Each kernel has a numba ``@njit`` implementation and a plain numpy/heapq
fallback that follows the same algorithm step for step.  Setting the
environment variable ``QMBOUNDS_DISABLE_NUMBA=1`` before import (or calling
:func:`set_backend`) selects the fallback.
"""

from __future__ import annotations

import heapq
import os

import numpy as np

try:
    import numba
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_DISABLED = os.environ.get("QMBOUNDS_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")
_backend = "numpy" if (_DISABLED or numba is None) else "numba"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError("backend must be 'numba' or 'numpy'")
    if name == "numba" and numba is None:
        raise RuntimeError("numba is not importable")
    _backend = name


# --------------------------------------------------------------------------
# shortest paths


def _dijkstra_py(nbr, cost, source):
    n, K = nbr.shape
    dist = np.full(n, np.inf)
    done = np.zeros(n, dtype=bool)
    heap = []
    for i in range(n):
        if source[i]:
            dist[i] = 0.0
            heap.append((0.0, i))
    heapq.heapify(heap)
    while heap:
        d, i = heapq.heappop(heap)
        if done[i]:
            continue
        done[i] = True
        for k in range(K):
            j = nbr[i, k]
            if j < 0 or done[j]:
                continue
            nd = d + cost[i, k]
            if nd < dist[j]:
                dist[j] = nd
                heapq.heappush(heap, (nd, j))
    return dist


if numba is not None:

    @njit(cache=True)
    def _less(d1, i1, d2, i2):
        return d1 < d2 or (d1 == d2 and i1 < i2)

    @njit(cache=True)
    def _dijkstra_nb(nbr, cost, source):
        n, K = nbr.shape
        dist = np.full(n, np.inf)
        done = np.zeros(n, dtype=np.bool_)
        cap = n + n * K
        hd = np.empty(cap)
        hi = np.empty(cap, dtype=np.int64)
        size = 0
        for i in range(n):
            if source[i]:
                dist[i] = 0.0
                # push (0, i)
                pos = size
                size += 1
                hd[pos] = 0.0
                hi[pos] = i
                while pos > 0:
                    par = (pos - 1) // 2
                    if _less(hd[pos], hi[pos], hd[par], hi[par]):
                        hd[pos], hd[par] = hd[par], hd[pos]
                        hi[pos], hi[par] = hi[par], hi[pos]
                        pos = par
                    else:
                        break
        while size > 0:
            d = hd[0]
            i = hi[0]
            size -= 1
            hd[0] = hd[size]
            hi[0] = hi[size]
            pos = 0
            while True:
                l = 2 * pos + 1
                r = l + 1
                m = pos
                if l < size and _less(hd[l], hi[l], hd[m], hi[m]):
                    m = l
                if r < size and _less(hd[r], hi[r], hd[m], hi[m]):
                    m = r
                if m == pos:
                    break
                hd[pos], hd[m] = hd[m], hd[pos]
                hi[pos], hi[m] = hi[m], hi[pos]
                pos = m
            if done[i]:
                continue
            done[i] = True
            for k in range(K):
                j = nbr[i, k]
                if j < 0 or done[j]:
                    continue
                nd = d + cost[i, k]
                if nd < dist[j]:
                    dist[j] = nd
                    pos = size
                    size += 1
                    hd[pos] = nd
                    hi[pos] = j
                    while pos > 0:
                        par = (pos - 1) // 2
                        if _less(hd[pos], hi[pos], hd[par], hi[par]):
                            hd[pos], hd[par] = hd[par], hd[pos]
                            hi[pos], hi[par] = hi[par], hi[pos]
                            pos = par
                        else:
                            break
        return dist


def dijkstra(nbr, cost, source, backend=None):
    """Multi-source shortest paths on a graph given as a padded adjacency table.

    Parameters
    ----------
    nbr : (n, K) int64, neighbor indices, ``-1`` for absent edges.
    cost : (n, K) float64, nonnegative edge costs.
    source : (n,) bool, zero-distance sources.

    Heap entries are ordered by ``(distance, node index)`` so both backends
    settle nodes in the same order and return bitwise-identical distances.
    """
    nbr = np.ascontiguousarray(nbr, dtype=np.int64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    source = np.ascontiguousarray(source, dtype=np.bool_)
    if (backend or _backend) == "numba":
        return _dijkstra_nb(nbr, cost, source)
    return _dijkstra_py(nbr, cost, source)


# --------------------------------------------------------------------------
# bump-field flows
#
# A hop is the vector field X(y) = eta(|y - c|) v with eta = 1 for
# |y - c| <= r_in, 0 for |y - c| >= r_out, quintic smoothstep in between.
# The kernels integrate the time-1 flows of a list of hops in sequence,
# carrying the first and second variational equations so the composite map
# F comes with J = dF/dx and K = d^2F/dx^2.


def _eta_np(r, r_in, r_out):
    t = np.clip((r_out - r) / (r_out - r_in), 0.0, 1.0)
    w = r_out - r_in
    s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
    ds = -30.0 * t * t * (1.0 - t) ** 2 / w
    dds = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (w * w)
    return s, ds, dds


def _rhs_np(y, J, K, c, v, r_in, r_out):
    """Right-hand side for a batch: y (n,d), J (n,d,d), K (n,d,d,d)."""
    d = y.shape[1]
    z = y - c
    r = np.sqrt(np.sum(z * z, axis=1))
    s, ds, dds = _eta_np(r, r_in, r_out)
    rs = np.where(r > 0, r, 1.0)
    nrm = z / rs[:, None]
    grad = ds[:, None] * nrm
    eye = np.eye(d)
    nn = nrm[:, :, None] * nrm[:, None, :]
    hess = dds[:, None, None] * nn + (ds / rs)[:, None, None] * (eye - nn)
    # zero out the (meaningless) derivative at the exact center; eta is flat there
    flat = r <= r_in
    grad[flat] = 0.0
    hess[flat] = 0.0
    dy = s[:, None] * v
    gJ = np.einsum("nj,nja->na", grad, J)
    dJ = v[None, :, None] * gJ[:, None, :]
    gK = np.einsum("nj,njab->nab", grad, K)
    JHJ = np.einsum("nja,njk,nkb->nab", J, hess, J)
    dK = v[None, :, None, None] * (gK + JHJ)[:, None, :, :]
    return dy, dJ, dK


def _rk4_np(y, J, K, c, v, r_in, r_out, nsteps):
    dt = 1.0 / nsteps
    for _ in range(nsteps):
        a = _rhs_np(y, J, K, c, v, r_in, r_out)
        b = _rhs_np(y + 0.5 * dt * a[0], J + 0.5 * dt * a[1], K + 0.5 * dt * a[2], c, v, r_in, r_out)
        e = _rhs_np(y + 0.5 * dt * b[0], J + 0.5 * dt * b[1], K + 0.5 * dt * b[2], c, v, r_in, r_out)
        f = _rhs_np(y + dt * e[0], J + dt * e[1], K + dt * e[2], c, v, r_in, r_out)
        y = y + dt / 6.0 * (a[0] + 2 * b[0] + 2 * e[0] + f[0])
        J = J + dt / 6.0 * (a[1] + 2 * b[1] + 2 * e[1] + f[1])
        K = K + dt / 6.0 * (a[2] + 2 * b[2] + 2 * e[2] + f[2])
    return y, J, K


def _flow_np(points, centers, dirs, r_in, r_out, nsteps):
    n, d = points.shape
    y = points.copy()
    J = np.broadcast_to(np.eye(d), (n, d, d)).copy()
    K = np.zeros((n, d, d, d))
    for m in range(centers.shape[0]):
        # X vanishes outside the support ball, so those points never move
        idx = np.flatnonzero(np.linalg.norm(y - centers[m], axis=1) < r_out[m])
        if idx.size == 0:
            continue
        y[idx], J[idx], K[idx] = _rk4_np(y[idx], J[idx], K[idx], centers[m], dirs[m],
                                         r_in[m], r_out[m], int(nsteps[m]))
    return y, J, K


if numba is not None:

    @njit(cache=True)
    def _rhs_nb(y, J, K, c, v, r_in, r_out, dy, dJ, dK):
        d = y.shape[0]
        r = 0.0
        for i in range(d):
            r += (y[i] - c[i]) ** 2
        r = np.sqrt(r)
        w = r_out - r_in
        t = (r_out - r) / w
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        s = t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
        ds = -30.0 * t * t * (1.0 - t) ** 2 / w
        dds = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t) / (w * w)
        rs = r if r > 0 else 1.0
        grad = np.zeros(d)
        hess = np.zeros((d, d))
        if r > r_in:
            for i in range(d):
                grad[i] = ds * (y[i] - c[i]) / rs
            for i in range(d):
                ni = (y[i] - c[i]) / rs
                for j in range(d):
                    nj = (y[j] - c[j]) / rs
                    e = 1.0 if i == j else 0.0
                    hess[i, j] = dds * ni * nj + ds / rs * (e - ni * nj)
        for i in range(d):
            dy[i] = s * v[i]
        gJ = np.zeros(d)
        for a in range(d):
            acc = 0.0
            for j in range(d):
                acc += grad[j] * J[j, a]
            gJ[a] = acc
        for i in range(d):
            for a in range(d):
                dJ[i, a] = v[i] * gJ[a]
        for a in range(d):
            for b in range(d):
                acc = 0.0
                for j in range(d):
                    acc += grad[j] * K[j, a, b]
                acc2 = 0.0
                for j in range(d):
                    for k in range(d):
                        acc2 += J[j, a] * hess[j, k] * J[k, b]
                for i in range(d):
                    dK[i, a, b] = v[i] * (acc + acc2)

    @njit(cache=True)
    def _rk4_nb(y0, J0, K0, c, v, r_in, r_out, nsteps):
        d = y0.shape[0]
        y = y0.copy()
        J = J0.copy()
        K = K0.copy()
        dt = 1.0 / nsteps
        ay, aJ, aK = np.empty(d), np.empty((d, d)), np.empty((d, d, d))
        by, bJ, bK = np.empty(d), np.empty((d, d)), np.empty((d, d, d))
        ey, eJ, eK = np.empty(d), np.empty((d, d)), np.empty((d, d, d))
        fy, fJ, fK = np.empty(d), np.empty((d, d)), np.empty((d, d, d))
        for _ in range(nsteps):
            _rhs_nb(y, J, K, c, v, r_in, r_out, ay, aJ, aK)
            _rhs_nb(y + 0.5 * dt * ay, J + 0.5 * dt * aJ, K + 0.5 * dt * aK, c, v, r_in, r_out, by, bJ, bK)
            _rhs_nb(y + 0.5 * dt * by, J + 0.5 * dt * bJ, K + 0.5 * dt * bK, c, v, r_in, r_out, ey, eJ, eK)
            _rhs_nb(y + dt * ey, J + dt * eJ, K + dt * eK, c, v, r_in, r_out, fy, fJ, fK)
            y = y + dt / 6.0 * (ay + 2 * by + 2 * ey + fy)
            J = J + dt / 6.0 * (aJ + 2 * bJ + 2 * eJ + fJ)
            K = K + dt / 6.0 * (aK + 2 * bK + 2 * eK + fK)
        return y, J, K

    @njit(cache=True)
    def _flow_nb(points, centers, dirs, r_in, r_out, nsteps):
        n, d = points.shape
        Y = points.copy()
        JJ = np.zeros((n, d, d))
        KK = np.zeros((n, d, d, d))
        for p in range(n):
            for i in range(d):
                JJ[p, i, i] = 1.0
        for m in range(centers.shape[0]):
            c = centers[m]
            for p in range(n):
                if not np.sqrt(np.sum((Y[p] - c) ** 2)) < r_out[m]:
                    continue
                y, J, K = _rk4_nb(Y[p], JJ[p], KK[p], c, dirs[m], r_in[m], r_out[m], nsteps[m])
                Y[p] = y
                JJ[p] = J
                KK[p] = K
        return Y, JJ, KK


def flow_hops(points, centers, dirs, r_in, r_out, nsteps, backend=None):
    """Compose time-1 flows of bump fields, hop by hop in the given order.

    ``nsteps[m]`` fixed RK4 steps are used for hop ``m`` at every point, so the
    composite map is a smooth function of the start point (see
    :func:`calibrate_steps`).  Returns the image points, the Jacobian
    ``J[n, i, a] = dF_i/dx_a`` and the second derivative ``K[n, i, a, b]``.
    """
    points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
    centers = np.ascontiguousarray(np.atleast_2d(centers), dtype=np.float64)
    dirs = np.ascontiguousarray(np.atleast_2d(dirs), dtype=np.float64)
    r_in = np.ascontiguousarray(r_in, dtype=np.float64).reshape(-1)
    r_out = np.ascontiguousarray(r_out, dtype=np.float64).reshape(-1)
    nsteps = np.ascontiguousarray(nsteps, dtype=np.int64).reshape(-1)
    if centers.shape[0] == 0 or centers.size == 0:
        n, d = points.shape
        return (points.copy(), np.broadcast_to(np.eye(d), (n, d, d)).copy(), np.zeros((n, d, d, d)))
    if (backend or _backend) == "numba":
        return _flow_nb(points, centers, dirs, r_in, r_out, nsteps)
    return _flow_np(points, centers, dirs, r_in, r_out, nsteps)


def _probe_points(c, r_out, d, per_axis=9):
    t = np.linspace(-1.0, 1.0, per_axis) * r_out
    mesh = np.meshgrid(*([t] * d), indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=-1)
    return c + pts[np.linalg.norm(pts, axis=1) < r_out]


def calibrate_steps(centers, dirs, r_in, r_out, tol=1e-9, start=8, max_doublings=14, backend=None):
    """Per-hop RK4 step counts from step doubling on probe points.

    For each hop the step count doubles until the ``n`` and ``2n`` solutions
    differ by at most ``tol`` (max norm) at every probe point of its ball; the
    finer count is returned.  Raises ``RuntimeError`` if ``max_doublings`` is
    not enough.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    out = np.zeros(centers.shape[0], dtype=np.int64)
    for m in range(centers.shape[0]):
        pts = _probe_points(centers[m], r_out[m], centers.shape[1])
        args = (centers[m:m + 1], dirs[m:m + 1], r_in[m:m + 1], r_out[m:m + 1])
        ns = start
        y1 = flow_hops(pts, *args, [ns], backend=backend)[0]
        for _ in range(max_doublings):
            y2 = flow_hops(pts, *args, [2 * ns], backend=backend)[0]
            ns *= 2
            if np.max(np.abs(y2 - y1)) <= tol:
                break
            y1 = y2
        else:
            raise RuntimeError(f"step doubling did not reach {tol} for hop {m}")
        out[m] = ns
    return out
