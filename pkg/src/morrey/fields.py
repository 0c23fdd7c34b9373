"""Discrete fields on the box ``[-L, L]^n``: gradients, energy, Hölder
seminorm, mollification, interpolation, polar resampling and file I/O."""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import ndimage
from scipy.interpolate import RegularGridInterpolator

from . import kernels
from .polar import PolarField, PolarSpec


class DomainError(ValueError):
    """A point or a polar grid reaches outside the box."""


def _as_int(x: float, what: str) -> int:
    k = round(x)
    if k < 1 or abs(x - k) > 1e-9 * max(1.0, abs(x)):
        raise ValueError(f"{what} must be a positive integer, got {x!r}")
    return int(k)


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid on ``[-L, L]^n`` with spacing ``h`` and exponent ``p``.

    ``1/h`` and ``L/h`` are integers so that ``+-e_n``, the plane ``x_n = 0``
    and the reflection ``x -> x - 2 x_n e_n`` are grid exact.  ``n = 1`` is
    accepted for the one-dimensional solver harness.
    """

    n: int
    L: float
    h: float
    p: float

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError(f"n must be 1, 2 or 3, got {self.n}")
        if not self.p > self.n or self.p < 2:
            raise ValueError(f"need p > n and p >= 2, got p={self.p}, n={self.n}")
        _as_int(1.0 / self.h, "1/h")
        _as_int(self.L / self.h, "L/h")
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")

    @property
    def cells_per_axis(self) -> int:
        return 2 * round(self.L / self.h)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis + 1,) * self.n

    @property
    def cell_shape(self) -> tuple[int, ...]:
        return (self.cells_per_axis,) * self.n

    @property
    def alpha(self) -> float:
        """Hölder exponent ``1 - n/p``."""
        return 1.0 - self.n / self.p

    @property
    def center(self) -> int:
        return self.cells_per_axis // 2

    @property
    def unit(self) -> int:
        """Number of cells per unit length."""
        return round(1.0 / self.h)

    @cached_property
    def axis(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.cells_per_axis + 1)

    def coords(self) -> list[np.ndarray]:
        """Broadcastable coordinate arrays ``x_1, ..., x_n``."""
        return np.meshgrid(*([self.axis] * self.n), indexing="ij", sparse=True)

    def index_of(self, point) -> tuple[int, ...]:
        """Multi-index of the node at ``point``; the point must be a node."""
        point = np.asarray(point, dtype=float).reshape(self.n)
        idx = (point + self.L) / self.h
        k = np.rint(idx).astype(int)
        if np.any(np.abs(idx - k) > 1e-9) or np.any(k < 0) or np.any(k > self.cells_per_axis):
            raise DomainError(f"{point.tolist()} is not a grid node")
        return tuple(int(x) for x in k)

    def point_of(self, index) -> np.ndarray:
        return self.axis[np.asarray(index)]

    @property
    def north(self) -> tuple[int, ...]:
        """Index of ``e_n``."""
        return (self.center,) * (self.n - 1) + (self.center + self.unit,)

    @property
    def south(self) -> tuple[int, ...]:
        return (self.center,) * (self.n - 1) + (self.center - self.unit,)

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.n):
            sl = [slice(None)] * self.n
            sl[k] = 0
            mask[tuple(sl)] = True
            sl[k] = -1
            mask[tuple(sl)] = True
        return mask

    def collar_mask(self, width: float) -> np.ndarray:
        """Nodes within ``width`` of the box boundary."""
        dist = self.L - np.abs(self.axis)
        near = dist < width - 1e-12
        mask = np.zeros(self.shape, dtype=bool)
        for k in range(self.n):
            shape = [1] * self.n
            shape[k] = -1
            mask |= near.reshape(shape)
        return mask

    def to_dict(self) -> dict:
        return {"n": self.n, "L": self.L, "h": self.h, "p": self.p}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        unknown = set(d) - {"n", "L", "h", "p"}
        if unknown:
            raise ValueError(f"unknown GridSpec keys: {sorted(unknown)}")
        return cls(n=int(d["n"]), L=float(d["L"]), h=float(d["h"]), p=float(d["p"]))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Nodal values on a :class:`GridSpec`; immutable."""

    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.spec.shape:
            raise ValueError(f"values have shape {vals.shape}, grid needs {self.spec.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, spec: GridSpec, func) -> "ScalarField":
        vals = np.broadcast_to(func(*spec.coords()), spec.shape)
        return cls(spec, vals)

    @classmethod
    def zeros(cls, spec: GridSpec) -> "ScalarField":
        return cls(spec, np.zeros(spec.shape))

    def __call__(self, index) -> float:
        return float(self.values[tuple(index)])

    def at(self, point) -> float:
        """Value at a grid node given by coordinates."""
        return float(self.values[self.spec.index_of(point)])

    def _check(self, other):
        if other.spec != self.spec:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        self._check(other)
        return ScalarField(self.spec, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return ScalarField(self.spec, self.values - other.values)

    def __neg__(self):
        return ScalarField(self.spec, -self.values)

    def __mul__(self, scalar):
        return ScalarField(self.spec, float(scalar) * self.values)

    __rmul__ = __mul__

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.spec, values)

    @cached_property
    def _interpolator(self):
        return RegularGridInterpolator([self.spec.axis] * self.spec.n, self.values,
                                       method="linear", bounds_error=False, fill_value=np.nan)


@dataclass(frozen=True, eq=False)
class GradientField:
    """Cell gradients of a :class:`ScalarField`.

    ``vectors`` (shape ``cells + (n,)``) is the cell-centred gradient, the mean
    of the edge differences along each axis.  ``corners`` (shape
    ``(2^n,) + cells + (n,)``) holds the per-corner forward-difference stencils
    the energy is built from.
    """

    spec: GridSpec
    vectors: np.ndarray
    corners: np.ndarray


@dataclass(frozen=True)
class SmoothingKernel:
    """Radial bump ``exp(-1/(1-|x|^2))`` scaled to radius ``epsilon``."""

    epsilon: float

    @staticmethod
    def profile(r: np.ndarray) -> np.ndarray:
        out = np.zeros_like(r, dtype=float)
        inside = r < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - r[inside] ** 2))
        return out

    def weights(self, h: float, n: int) -> np.ndarray:
        """Discrete weights on the lattice ``h Z^n``, renormalised to sum 1."""
        if self.epsilon < h * (1 - 1e-12):
            raise ValueError("kernel unresolved: epsilon must be at least the grid spacing")
        m = int(math.floor(self.epsilon / h))
        ax = np.arange(-m, m + 1) * h
        r = np.sqrt(sum(c**2 for c in np.meshgrid(*([ax] * n), indexing="ij", sparse=True)))
        w = self.profile(r / self.epsilon)
        return w / w.sum()


def _corner_stencils(field: ScalarField) -> np.ndarray:
    spec = field.spec
    u = field.values
    n = spec.n
    N = spec.cells_per_axis
    diffs = [np.diff(u, axis=k) / spec.h for k in range(n)]
    out = np.empty((2**n,) + spec.cell_shape + (n,))
    for ci, c in enumerate(itertools.product((0, 1), repeat=n)):
        for k in range(n):
            sl = tuple(slice(None) if m == k else slice(c[m], c[m] + N) for m in range(n))
            out[(ci,) + (Ellipsis,) + (k,)] = diffs[k][sl]
    return out


def gradient(field: ScalarField) -> GradientField:
    corners = _corner_stencils(field)
    return GradientField(field.spec, corners.mean(axis=0), corners)


def dirichlet_energy(field: ScalarField) -> float:
    """``int |Du|^p`` as the corner-averaged cell sum."""
    E, _ = kernels.energy_and_gradient(field.values, field.spec.h, field.spec.p, want_grad=False)
    return E


def energy_gradient(field: ScalarField) -> tuple[float, np.ndarray]:
    """Energy and its derivative with respect to every nodal value."""
    return kernels.energy_and_gradient(field.values, field.spec.h, field.spec.p)


def corner_energy(corners: np.ndarray, h: float, p: float) -> float:
    """Energy of a corner-stencil array (same quadrature as :func:`dirichlet_energy`)."""
    n = corners.shape[-1]
    s = np.einsum("...k,...k->...", corners, corners)
    return float((s ** (0.5 * p)).sum()) * h**n / 2**n


def holder_seminorm(field: ScalarField, method: str = "exact"):
    """``max |u(x)-u(y)| / |x-y|^(1-n/p)`` over node pairs.

    Returns ``(value, (x, y))`` with ``x``, ``y`` the coordinates of a
    maximising pair.  ``method="exact"`` scans offsets in order of length
    with a provably safe cutoff; ``method="brute"`` visits every pair.
    """
    spec = field.spec
    if method == "exact":
        value, a, b = kernels.holder_scan(field.values, spec.h, spec.alpha)
    elif method == "brute":
        value, a, b = _holder_brute(field)
    else:
        raise ValueError(f"unknown method {method!r}")
    return value, (spec.point_of(a), spec.point_of(b))


def _holder_brute(field: ScalarField):
    spec = field.spec
    u = field.values.ravel()
    idx = np.indices(spec.shape).reshape(spec.n, -1).T
    pts = idx * spec.h
    best, ba, bb = 0.0, 0, 1
    for i in range(len(u) - 1):
        d = np.sqrt(((pts[i + 1:] - pts[i]) ** 2).sum(axis=1))
        q = np.abs(u[i + 1:] - u[i]) / d**spec.alpha
        j = int(np.argmax(q))
        if q[j] > best:
            best, ba, bb = float(q[j]), i, i + 1 + j
    return best, tuple(idx[ba]), tuple(idx[bb])


def mollify(field: ScalarField, kernel: SmoothingKernel) -> ScalarField:
    """Discrete convolution with the scaled kernel; zero extension outside the box."""
    w = kernel.weights(field.spec.h, field.spec.n)
    out = ndimage.correlate(field.values, w, mode="constant", cval=0.0)
    return field.with_values(out)


def interpolate(field: ScalarField, point, fill_outside: float | None = None):
    """Multilinear interpolation at one point (shape ``(n,)``) or many (``(m, n)``).

    Points outside the box raise :class:`DomainError` unless ``fill_outside``
    is given, in which case they receive that value.
    """
    pts = np.asarray(point, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    L = field.spec.L
    tol = 1e-12 * max(1.0, L)
    outside = np.any(np.abs(pts) > L + tol, axis=1)
    if outside.any() and fill_outside is None:
        raise DomainError("interpolation point out of domain")
    vals = field._interpolator(np.clip(pts, -L, L))
    if outside.any():
        vals[outside] = fill_outside
    return float(vals[0]) if single else vals


def to_polar(field: ScalarField, pspec: PolarSpec) -> PolarField:
    """Sample ``field`` on the polar grid by multilinear interpolation."""
    if pspec.n != field.spec.n:
        raise ValueError("dimension mismatch between field and polar grid")
    if pspec.t_max > field.spec.L * (1 + 1e-12):
        raise DomainError("polar grid out of domain: outer shell leaves the box")
    pts = pspec.cartesian_points()
    vals = interpolate(field, pts.reshape(-1, pspec.n))
    return PolarField(pspec, vals.reshape(pspec.shape))


def from_polar(pfield: PolarField, spec: GridSpec) -> ScalarField:
    """Nearest-shell lookup, linear in the angular direction(s)."""
    pspec = pfield.spec
    if pspec.n != spec.n:
        raise ValueError("dimension mismatch between polar field and grid")
    if pspec.t_max > spec.L * (1 + 1e-12):
        raise DomainError("polar grid out of domain: outer shell leaves the box")
    coords = np.meshgrid(*([spec.axis] * spec.n), indexing="ij")
    pts = np.stack([c.ravel() for c in coords], axis=1)
    return ScalarField(spec, pfield.sample(pts).reshape(spec.shape))


# ------------------------------------------------------------------ file I/O

def write_field_csv(field: ScalarField, path) -> None:
    """CSV with header ``x1,...,xn,value``; rows in lexicographic node order."""
    spec = field.spec
    coords = np.meshgrid(*([spec.axis] * spec.n), indexing="ij")
    cols = [c.ravel() for c in coords] + [field.values.ravel()]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{k + 1}" for k in range(spec.n)] + ["value"])
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])


def read_field_csv(path, spec: GridSpec) -> ScalarField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (int(np.prod(spec.shape)), spec.n + 1):
        raise ValueError(f"{path}: expected {np.prod(spec.shape)} rows of {spec.n + 1} columns")
    return ScalarField(spec, data[:, -1].reshape(spec.shape))


def write_spec_json(spec: GridSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def read_spec_json(path) -> GridSpec:
    return GridSpec.from_dict(json.loads(Path(path).read_text()))
