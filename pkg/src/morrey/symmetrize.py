"""Symmetrisation operators: axial average, axial sweep, gradient split, cap
symmetrisation of sets, cap rearrangement of polar fields, positive part and
odd extension.

Coordinates are split as ``x = (y, x_n)`` with ``y`` in ``R^(n-1)``; the
symmetry axis is the ``x_n`` axis through the box centre.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy import sparse

from . import kernels
from .fields import GridSpec, ScalarField, _corner_stencils, corner_energy
from .polar import PolarField, PolarSpec


# ------------------------------------------------------------ lattice circles

@lru_cache(maxsize=16)
def _radius_groups(size: int):
    """Group the nodes of a ``size x size`` plane by squared distance (in
    cells) to the centre node.  Returns ``(k_values, group_of_node)``."""
    c = size // 2
    i = np.arange(size) - c
    k = i[:, None] ** 2 + i[None, :] ** 2
    ks, inv = np.unique(k.ravel(), return_inverse=True)
    return ks, inv.reshape(size, size)


def _keys_weights(f: np.ndarray) -> list[np.ndarray]:
    """Cubic convolution weights (Keys, a = -1/2) for offsets -1, 0, 1, 2."""
    f2, f3 = f * f, f * f * f
    return [0.5 * (-f3 + 2 * f2 - f), 0.5 * (3 * f3 - 5 * f2 + 2),
            0.5 * (-3 * f3 + 4 * f2 + f), 0.5 * (f3 - f2)]


def _cubic_rows(size: int, pts: np.ndarray, rows: np.ndarray, scale: np.ndarray):
    """Sparse triplets for cubic-convolution sampling of a ``size x size``
    plane at index-space points ``pts`` (m, 2).  The rule interpolates nodal
    values, reproduces quadratics, and reads 0 outside the plane."""
    a, b = pts[:, 0], pts[:, 1]
    a0 = np.floor(a).astype(np.int64)
    b0 = np.floor(b).astype(np.int64)
    wa_all = _keys_weights(a - a0)
    wb_all = _keys_weights(b - b0)
    R, C, V = [], [], []
    for da, wa in zip((-1, 0, 1, 2), wa_all):
        for db, wb in zip((-1, 0, 1, 2), wb_all):
            ia, ib = a0 + da, b0 + db
            w = wa * wb * scale
            ok = (ia >= 0) & (ia < size) & (ib >= 0) & (ib < size) & (w != 0)
            R.append(rows[ok])
            C.append(ia[ok] * size + ib[ok])
            V.append(w[ok])
    return np.concatenate(R), np.concatenate(C), np.concatenate(V)


@lru_cache(maxsize=16)
def _circle_average_matrix(size: int) -> sparse.csr_matrix:
    """Rows: lattice radii.  Each row averages cubic samples on the circle
    of that radius, with ``M`` equispaced angles (``M`` a multiple of 8, arc
    spacing at most half a cell) starting on the first axis."""
    ks, _ = _radius_groups(size)
    c = size // 2
    pts, rows, scale = [], [], []
    for g, k in enumerate(ks):
        r = math.sqrt(k)
        M = 8 * max(1, math.ceil(math.pi * r / 2))
        th = 2 * np.pi * np.arange(M) / M
        pts.append(np.stack([c + r * np.cos(th), c + r * np.sin(th)], axis=1))
        rows.append(np.full(M, g))
        scale.append(np.full(M, 1.0 / M))
    R, C, V = _cubic_rows(size, np.concatenate(pts), np.concatenate(rows), np.concatenate(scale))
    return sparse.csr_matrix((V, (R, C)), shape=(len(ks), size * size))


def _ray_matrix(size: int, zeta: np.ndarray) -> sparse.csr_matrix:
    ks, _ = _radius_groups(size)
    c = size // 2
    r = np.sqrt(ks.astype(float))
    pts = np.stack([c + r * zeta[0], c + r * zeta[1]], axis=1)
    R, C, V = _cubic_rows(size, pts, np.arange(len(ks)), np.ones(len(ks)))
    return sparse.csr_matrix((V, (R, C)), shape=(len(ks), size * size))


def _apply_profile(field: ScalarField, mat: sparse.csr_matrix) -> np.ndarray:
    size = field.spec.shape[0]
    _, group = _radius_groups(size)
    U = field.values.reshape(size * size, size)
    prof = mat @ U
    return prof[group]


# ---------------------------------------------------------- axial operators

def axial_average(field: ScalarField) -> ScalarField:
    """Average over the circles (n=3) or point pairs ``+-y`` (n=2) ``|y| = r``
    at each height.

    For ``n = 2`` this is ``(u(y, x_2) + u(-y, x_2)) / 2`` exactly.  For
    ``n = 3`` each lattice radius is averaged by an equispaced angular rule on
    cubic-convolution samples (zero outside the box); the rule is invariant
    under the lattice symmetries, so the output is too.
    """
    n = field.spec.n
    u = field.values
    if n == 2:
        return field.with_values(0.5 * (u + u[::-1, :]))
    if n != 3:
        raise ValueError("axial average needs n = 2 or 3")
    size = field.spec.shape[0]
    return field.with_values(_apply_profile(field, _circle_average_matrix(size)))


def axial_sweep(field: ScalarField, zeta) -> ScalarField:
    """``u^zeta(y, x_n) = u(|y| zeta, x_n)``; samples leaving the box read 0.

    For ``n = 2`` the samples are nodes.  For ``n = 3`` they come from the same
    cubic-convolution rule as :func:`axial_average`, which is exact at nodes.
    """
    n = field.spec.n
    zeta = np.atleast_1d(np.asarray(zeta, dtype=float))
    if zeta.shape != (n - 1,) or abs(np.linalg.norm(zeta) - 1.0) > 1e-12:
        raise ValueError(f"zeta must be a unit vector in R^{n - 1}")
    u = field.values
    if n == 2:
        N = field.spec.cells_per_axis
        c = N // 2
        src = c + int(np.sign(zeta[0])) * np.abs(np.arange(N + 1) - c)
        return field.with_values(u[src, :])
    if n != 3:
        raise ValueError("axial sweep needs n = 2 or 3")
    size = field.spec.shape[0]
    return field.with_values(_apply_profile(field, _ray_matrix(size, zeta)))


def sweep_directions(n: int, count: int = 32):
    """Quadrature on ``S^(n-2)``: ``(+-1)`` for n=2, ``count`` equispaced
    circle directions for n=3.  Returns ``(directions, weights)``."""
    if n == 2:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    th = 2 * np.pi * np.arange(count) / count
    return np.stack([np.cos(th), np.sin(th)], axis=1), np.full(count, 1.0 / count)


# ------------------------------------------------------------ gradient split

@dataclass(frozen=True, eq=False)
class GradientSplit:
    """Radial and tangential parts of the cell gradients.

    ``radial`` carries ``(D_r u, u_{x_n})`` and ``tangential`` carries
    ``(D_S u, 0)``; both have shape ``cells + (n,)``.  The ``*_corners``
    arrays hold the same split for every corner stencil.  For ``n = 2`` the
    tangential part is ``(u_y(y) + u_y(-y)) / 2``, the ``y``-derivative of the
    odd part of ``u``; the two parts then sum to the gradient but need not be
    orthogonal.
    """

    spec: GridSpec
    radial: np.ndarray
    tangential: np.ndarray
    radial_corners: np.ndarray
    tangential_corners: np.ndarray
    on_axis: np.ndarray


def gradient_split(field: ScalarField) -> GradientSplit:
    spec = field.spec
    n = spec.n
    corners = _corner_stencils(field)
    if n == 2:
        # mirror image of each corner stencil: flip the cell index along y and
        # the corner bit along y (corner index = 2*c_y + c_x2)
        mirrored = corners[[2, 3, 0, 1]][:, ::-1]
        tang_y = 0.5 * (corners[..., 0] + mirrored[..., 0])
        tang = np.zeros_like(corners)
        tang[..., 0] = tang_y
        rad = corners - tang
        on_axis = np.zeros(spec.cell_shape, dtype=bool)
    elif n == 3:
        mid = spec.axis[:-1] + 0.5 * spec.h
        y = np.stack(np.meshgrid(mid, mid, indexing="ij"), axis=-1)[:, :, None, :]
        ry = np.sqrt((y**2).sum(axis=-1, keepdims=True))
        on_axis = np.broadcast_to(ry[..., 0] == 0, spec.cell_shape)
        yhat = np.where(ry > 0, y / np.where(ry > 0, ry, 1.0), 0.0)
        gy = corners[..., :2]
        proj = (gy * yhat).sum(axis=-1, keepdims=True) * yhat
        tang = np.zeros_like(corners)
        tang[..., :2] = gy - proj
        rad = corners - tang
    else:
        raise ValueError("gradient split needs n = 2 or 3")
    return GradientSplit(spec, rad.mean(axis=0), tang.mean(axis=0), rad, tang, on_axis)


def tangential_energy(field: ScalarField) -> float:
    """``int |D_S u|^p`` with the corner quadrature of the energy."""
    split = gradient_split(field)
    return corner_energy(split.tangential_corners, field.spec.h, field.spec.p)


# ---------------------------------------------------------------- cap sets

KINDS = ("empty", "full", "cap")


@dataclass(frozen=True, eq=False)
class CapSet:
    """Per-shell cap ``{x : |x| = t, x_n > t cos(theta)}`` (or empty / full)."""

    n: int
    radii: np.ndarray
    kind: tuple[str, ...]
    theta: np.ndarray

    def __post_init__(self):
        if len(self.kind) != len(self.radii) or len(self.theta) != len(self.radii):
            raise ValueError("one kind and one angle per shell")
        if any(k not in KINDS for k in self.kind):
            raise ValueError(f"kind must be one of {KINDS}")

    def measure(self) -> np.ndarray:
        t = np.asarray(self.radii, dtype=float)
        sphere = 2 * np.pi * t if self.n == 2 else 4 * np.pi * t**2
        cap = 2 * t * self.theta if self.n == 2 else 2 * np.pi * t**2 * (1 - np.cos(self.theta))
        kinds = np.array(self.kind)
        return np.where(kinds == "empty", 0.0, np.where(kinds == "full", sphere, cap))

    def contains(self, shell: int, theta) -> np.ndarray:
        """Membership of polar angles on one shell (caps are open)."""
        theta = np.asarray(theta, dtype=float)
        k = self.kind[shell]
        if k == "empty":
            return np.zeros(theta.shape, dtype=bool)
        if k == "full":
            return np.ones(theta.shape, dtype=bool)
        return theta < self.theta[shell]

    def subset_of(self, other: "CapSet") -> bool:
        order = {"empty": 0, "cap": 1, "full": 2}
        for a, b, ta, tb in zip(self.kind, other.kind, self.theta, other.theta):
            if order[a] > order[b] or (a == b == "cap" and ta > tb * (1 + 1e-12)):
                return False
        return True

    def to_json(self) -> str:
        rows = [{"t": float(t), "kind": k, "theta": float(th)}
                for t, k, th in zip(self.radii, self.kind, self.theta)]
        return json.dumps({"n": self.n, "shells": rows}, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "CapSet":
        d = json.loads(text)
        rows = d["shells"]
        return cls(int(d["n"]), np.array([r["t"] for r in rows]),
                   tuple(r["kind"] for r in rows), np.array([r["theta"] for r in rows]))

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())


def cap_symmetrize_set(indicator: PolarField) -> CapSet:
    """Replace each shell's marked set by the cap of equal measure about ``+e_n``."""
    v = indicator.values
    if not np.all((v == 0) | (v == 1)):
        raise ValueError("indicator values must be 0 or 1")
    sp = indicator.spec
    S = sp.n_shells
    flat = v.reshape(S, -1)
    w = sp.weights.reshape(S, -1)
    mass = (flat * w).sum(axis=1)
    kinds, theta = [], np.zeros(S)
    for i in range(S):
        if not flat[i].any():
            kinds.append("empty")
        elif flat[i].all():
            kinds.append("full")
            theta[i] = np.pi
        else:
            kinds.append("cap")
            theta[i] = float(sp.cap_angle(sp.radii[i], mass[i]))
    return CapSet(sp.n, sp.radii.copy(), tuple(kinds), theta)


def cap_rearrange(pfield: PolarField) -> PolarField:
    """Per shell, place the samples in decreasing order along increasing polar
    angle.  All samples on a shell carry equal weight, so the output is a
    permutation of the input on every shell.  Ties keep their original
    position order."""
    v = pfield.values
    if not np.all(np.isfinite(v)):
        raise ValueError("inadmissible field: values must be finite on every shell")
    sp = pfield.spec
    S = sp.n_shells
    flat = v.reshape(S, -1)
    pos = sp.position_order
    rank = np.empty_like(pos)
    rank[pos] = np.arange(pos.size)
    out = np.empty_like(flat)
    for i in range(S):
        order = np.lexsort((rank, -flat[i]))
        out[i, pos] = flat[i, order]
    return pfield.with_values(out.reshape(sp.shape))


# --------------------------------------------- positive part, odd extension

def positive_part(field):
    """Nodewise ``max(u, 0)`` for a ScalarField or PolarField."""
    return field.with_values(np.maximum(field.values, 0.0))


def odd_extension(field: ScalarField, tol: float = 1e-6) -> ScalarField:
    """``w = v`` on ``x_n > 0``, ``0`` on ``x_n = 0``, ``-v(Tx)`` below.

    Only values on ``x_n >= 0`` are read.  The trace on ``x_n = 0`` must vanish
    within ``tol``.
    """
    spec = field.spec
    c = spec.center
    v = field.values
    trace = float(np.abs(v[..., c]).max())
    if trace > tol:
        raise ValueError(f"trace mismatch: |v| = {trace:.3e} on x_n = 0 exceeds {tol:g}")
    w = np.empty_like(v)
    w[..., c + 1:] = v[..., c + 1:]
    w[..., c] = 0.0
    w[..., :c] = -v[..., :c:-1]
    return field.with_values(w)


def half_box_energy(field: ScalarField) -> float:
    """Energy of the cells in ``x_n >= 0``."""
    spec = field.spec
    upper = field.values[..., spec.center:]
    E, _ = kernels.energy_and_gradient(upper, spec.h, spec.p, want_grad=False)
    return E


def default_polar_spec(spec: GridSpec, margin: float | None = None) -> PolarSpec:
    """Polar grid inside the box: shells every ``h`` out to ``L - margin``."""
    margin = 2 * spec.h if margin is None else margin
    return PolarSpec.default(spec.n, spec.L - margin, spec.h)
