"""Hot numeric kernels: discrete p-Dirichlet energy, its derivatives, and the
Hölder pair scan.

Every kernel exists twice: an explicit-loop version compiled with numba and a
vectorised numpy version.  The public dispatchers pick one according to
``morrey._accel.USE_NUMBA``.  Both paths share the same stencil tables so they
agree to rounding.

The energy uses corner-averaged forward differences: each cell contributes the
mean of ``|g_c|^p`` over its ``2^n`` corners, where ``g_c`` collects the ``n``
cell edges that meet at corner ``c``.  The stencil is exact for affine fields,
invariant under every reflection of the grid, and vanishes only on constants.
"""
from __future__ import annotations

import itertools
from functools import lru_cache

import numpy as np

from . import _accel
from ._accel import njit


@lru_cache(maxsize=32)
def stencil(shape: tuple[int, ...]):
    """Cell origins and per-corner edge offsets for a node array of ``shape``.

    Returns ``(origins, lo, hi)``: ``origins[i]`` is the flat index of the
    lowest node of cell ``i``; the edge used by corner ``c`` along axis ``k``
    runs from ``origins + lo[c, k]`` to ``origins + hi[c, k]``.
    """
    shape = tuple(int(s) for s in shape)
    n = len(shape)
    strides = np.array([int(np.prod(shape[k + 1:])) for k in range(n)], dtype=np.int64)
    cells = np.indices([s - 1 for s in shape]).reshape(n, -1)
    origins = (strides[:, None] * cells).sum(axis=0).astype(np.int64)
    corners = list(itertools.product((0, 1), repeat=n))
    lo = np.zeros((len(corners), n), dtype=np.int64)
    for ci, c in enumerate(corners):
        for k in range(n):
            lo[ci, k] = sum(c[m] * strides[m] for m in range(n) if m != k)
    hi = lo + strides[None, :]
    for a in (origins, lo, hi):
        a.setflags(write=False)
    return origins, lo, hi


def _exponent_code(p: float) -> int:
    """Fast-path code for ``s ** (p/2 - 1)``: 0..3 integer powers, -1 sqrt, -2 generic."""
    e = 0.5 * p - 1.0
    if e == int(e) and 0 <= e <= 3:
        return int(e)
    if e == 0.5:
        return -1
    return -2


@njit
def _halfpow(s, e, code):
    if code == 1:
        return s
    if code == 0:
        return 1.0
    if code == 2:
        return s * s
    if code == 3:
        return s * s * s
    if code == -1:
        return np.sqrt(s)
    return s ** e


# ---------------------------------------------------------------- numba loops

@njit
def _energy_grad_loop(u, origins, lo, hi, h, p, weight, code, want_grad):
    nc, n = lo.shape
    e = 0.5 * p - 1.0
    ih = 1.0 / h
    grad = np.zeros(u.size)
    g = np.empty(n)
    E = 0.0
    for cell in range(origins.size):
        o = origins[cell]
        for c in range(nc):
            s = 0.0
            for k in range(n):
                gk = (u[o + hi[c, k]] - u[o + lo[c, k]]) * ih
                g[k] = gk
                s += gk * gk
            if s > 0.0:
                m = _halfpow(s, e, code)
                E += m * s
                if want_grad:
                    f = weight * p * m * ih
                    for k in range(n):
                        t = f * g[k]
                        grad[o + hi[c, k]] += t
                        grad[o + lo[c, k]] -= t
    return E * weight, grad


@njit
def _line_derivs_loop(u, d, origins, lo, hi, h, p, weight, code, alpha):
    nc, n = lo.shape
    e = 0.5 * p - 1.0
    ih = 1.0 / h
    phi = 0.0
    d1 = 0.0
    d2 = 0.0
    for cell in range(origins.size):
        o = origins[cell]
        for c in range(nc):
            s = 0.0
            gq = 0.0
            qq = 0.0
            for k in range(n):
                a = o + lo[c, k]
                b = o + hi[c, k]
                qk = (d[b] - d[a]) * ih
                gk = (u[b] - u[a]) * ih + alpha * qk
                s += gk * gk
                gq += gk * qk
                qq += qk * qk
            if s > 0.0:
                m = _halfpow(s, e, code)
                phi += m * s
                d1 += m * gq
                d2 += m * qq + (p - 2.0) * m / s * gq * gq
    return phi * weight, d1 * weight * p, d2 * weight * p


@njit
def _hess_diag_loop(u, origins, lo, hi, h, p, weight, code):
    nc, n = lo.shape
    e = 0.5 * p - 1.0
    ih = 1.0 / h
    diag = np.zeros(u.size)
    g = np.empty(n)
    for cell in range(origins.size):
        o = origins[cell]
        for c in range(nc):
            s = 0.0
            for k in range(n):
                gk = (u[o + hi[c, k]] - u[o + lo[c, k]]) * ih
                g[k] = gk
                s += gk * gk
            if s > 0.0:
                m = _halfpow(s, e, code)
                for k in range(n):
                    t = weight * p * (m + (p - 2.0) * m / s * g[k] * g[k]) * ih * ih
                    diag[o + hi[c, k]] += t
                    diag[o + lo[c, k]] += t
    return diag


# ------------------------------------------------------------- numpy versions

def _corner_grads(u, origins, lo, hi, h):
    return (u[origins[:, None, None] + hi[None]] - u[origins[:, None, None] + lo[None]]) / h


def _scatter(values, idx_hi, idx_lo, size):
    return (np.bincount(idx_hi.ravel(), weights=values.ravel(), minlength=size)
            - np.bincount(idx_lo.ravel(), weights=values.ravel(), minlength=size))


def _energy_grad_np(u, origins, lo, hi, h, p, weight, want_grad):
    g = _corner_grads(u, origins, lo, hi, h)
    s = np.einsum("...k,...k->...", g, g)
    m = s ** (0.5 * p - 1.0)
    E = float((m * s).sum()) * weight
    if not want_grad:
        return E, np.zeros(u.size)
    t = (weight * p / h) * m[..., None] * g
    ihi = origins[:, None, None] + hi[None]
    ilo = origins[:, None, None] + lo[None]
    return E, _scatter(t, ihi, ilo, u.size)


def _line_derivs_np(u, d, origins, lo, hi, h, p, weight, alpha):
    q = _corner_grads(d, origins, lo, hi, h)
    g = _corner_grads(u, origins, lo, hi, h) + alpha * q
    s = np.einsum("...k,...k->...", g, g)
    gq = np.einsum("...k,...k->...", g, q)
    qq = np.einsum("...k,...k->...", q, q)
    m = s ** (0.5 * p - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        curv = np.where(s > 0, (p - 2.0) * m / np.where(s > 0, s, 1.0) * gq * gq, 0.0)
    return (float((m * s).sum()) * weight, float((m * gq).sum()) * weight * p,
            float((m * qq + curv).sum()) * weight * p)


def _hess_diag_np(u, origins, lo, hi, h, p, weight):
    g = _corner_grads(u, origins, lo, hi, h)
    s = np.einsum("...k,...k->...", g, g)
    m = s ** (0.5 * p - 1.0)
    safe = np.where(s > 0, s, 1.0)
    t = weight * p * (m[..., None] + np.where(s > 0, (p - 2.0) * m / safe, 0.0)[..., None] * g * g) / h**2
    ihi = (origins[:, None, None] + hi[None]).ravel()
    ilo = (origins[:, None, None] + lo[None]).ravel()
    return (np.bincount(ihi, weights=t.ravel(), minlength=u.size)
            + np.bincount(ilo, weights=t.ravel(), minlength=u.size))


# ---------------------------------------------------------------- dispatchers

def _prep(u):
    u = np.ascontiguousarray(u, dtype=float)
    origins, lo, hi = stencil(u.shape)
    return u, u.ravel(), origins, lo, hi


def energy_and_gradient(u: np.ndarray, h: float, p: float, want_grad: bool = True):
    """Discrete energy ``sum_cells h^n mean_c |g_c|^p`` and its nodal gradient."""
    u, flat, origins, lo, hi = _prep(u)
    weight = h ** u.ndim / 2 ** u.ndim
    if _accel.USE_NUMBA:
        E, grad = _energy_grad_loop(flat, origins, lo, hi, float(h), float(p), weight,
                                    _exponent_code(p), want_grad)
    else:
        E, grad = _energy_grad_np(flat, origins, lo, hi, h, p, weight, want_grad)
    return E, grad.reshape(u.shape)


def line_derivatives(u: np.ndarray, d: np.ndarray, h: float, p: float, alpha: float):
    """``(phi, phi', phi'')`` of ``phi(a) = E(u + a d)`` at ``a = alpha``."""
    u, flat, origins, lo, hi = _prep(u)
    dflat = np.ascontiguousarray(d, dtype=float).ravel()
    weight = h ** u.ndim / 2 ** u.ndim
    if _accel.USE_NUMBA:
        return _line_derivs_loop(flat, dflat, origins, lo, hi, float(h), float(p), weight,
                                 _exponent_code(p), float(alpha))
    return _line_derivs_np(flat, dflat, origins, lo, hi, h, p, weight, alpha)


def hessian_diagonal(u: np.ndarray, h: float, p: float) -> np.ndarray:
    u, flat, origins, lo, hi = _prep(u)
    weight = h ** u.ndim / 2 ** u.ndim
    if _accel.USE_NUMBA:
        diag = _hess_diag_loop(flat, origins, lo, hi, float(h), float(p), weight, _exponent_code(p))
    else:
        diag = _hess_diag_np(flat, origins, lo, hi, h, p, weight)
    return diag.reshape(u.shape)


# ------------------------------------------------------------ Hölder scanning

@lru_cache(maxsize=8)
def _offsets(shape: tuple[int, ...]):
    """Half-space lattice offsets (first nonzero component positive), sorted by length."""
    n = len(shape)
    axes = [np.arange(-(s - 1), s) for s in shape]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    first = np.zeros(len(grid), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        first = np.where(grid[:, k] != 0, grid[:, k], first)
    grid = grid[first > 0]
    r2 = (grid.astype(np.int64) ** 2).sum(axis=1)
    order = np.lexsort(tuple(grid[:, k] for k in range(n - 1, -1, -1)) + (r2,))
    grid = np.ascontiguousarray(grid[order]).astype(np.int64)
    r2 = np.ascontiguousarray(r2[order])
    grid.setflags(write=False)
    r2.setflags(write=False)
    return grid, r2


@njit
def _holder_scan_loop(u3, offs3, dpow, osc):
    s0, s1, s2 = u3.shape
    best = 0.0
    ba = (0, 0, 0)
    bb = (0, 0, 0)
    for t in range(offs3.shape[0]):
        if osc <= best * dpow[t]:
            break
        d0 = offs3[t, 0]
        d1 = offs3[t, 1]
        d2 = offs3[t, 2]
        mx = -1.0
        ma = (0, 0, 0)
        for i in range(max(0, -d0), s0 - max(0, d0)):
            for j in range(max(0, -d1), s1 - max(0, d1)):
                for k in range(max(0, -d2), s2 - max(0, d2)):
                    v = abs(u3[i + d0, j + d1, k + d2] - u3[i, j, k])
                    if v > mx:
                        mx = v
                        ma = (i, j, k)
        q = mx / dpow[t]
        if q > best:
            best = q
            ba = ma
            bb = (ma[0] + d0, ma[1] + d1, ma[2] + d2)
    return best, ba, bb


def _holder_scan_np(u3, offs3, dpow, osc):
    s = u3.shape
    best, ba, bb = 0.0, (0, 0, 0), (0, 0, 0)
    for t in range(offs3.shape[0]):
        if osc <= best * dpow[t]:
            break
        d = offs3[t]
        src = tuple(slice(max(0, -dk), sk - max(0, dk)) for dk, sk in zip(d, s))
        dst = tuple(slice(max(0, -dk) + dk, sk - max(0, dk) + dk) for dk, sk in zip(d, s))
        diff = np.abs(u3[dst] - u3[src])
        flat = int(np.argmax(diff))
        q = diff.flat[flat] / dpow[t]
        if q > best:
            best = float(q)
            loc = np.unravel_index(flat, diff.shape)
            ba = tuple(int(l + sl.start) for l, sl in zip(loc, src))
            bb = tuple(a + int(dk) for a, dk in zip(ba, d))
    return best, ba, bb


def holder_scan(u: np.ndarray, h: float, alpha: float):
    """Exact max of ``|u(x)-u(y)| / |x-y|^alpha`` over node pairs.

    Offsets are visited in order of increasing length and the scan stops once
    ``osc / |d|^alpha`` (an upper bound for every remaining pair) cannot beat
    the running maximum, so the result equals the full pair scan.
    Returns ``(value, index_a, index_b)`` with multi-indices into ``u``.
    """
    u = np.ascontiguousarray(u, dtype=float)
    n = u.ndim
    osc = float(u.max() - u.min())
    if osc == 0.0:
        a = (0,) * n
        b = (0,) * (n - 1) + (1,)
        return 0.0, a, b
    offs, r2 = _offsets(u.shape)
    dpow = (np.sqrt(r2.astype(float)) * h) ** alpha
    u3 = u.reshape(u.shape + (1,) * (3 - n))
    offs3 = np.zeros((len(offs), 3), dtype=np.int64)
    offs3[:, :n] = offs
    if _accel.USE_NUMBA:
        best, a, b = _holder_scan_loop(u3, offs3, dpow, osc)
    else:
        best, a, b = _holder_scan_np(u3, offs3, dpow, osc)
    return float(best), tuple(int(x) for x in a[:n]), tuple(int(x) for x in b[:n])
