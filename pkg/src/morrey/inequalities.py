"""Both sides and the deficit of the inequalities used around Morrey
extremals, as reusable checkers over discrete fields.

Inequalities that hold in exact arithmetic for the discrete scheme (Clarkson,
the elementary split bound, the n=2 axial Pólya–Szegő and sweep identities)
are checked at rounding level.  The others carry a tolerance ``eps_disc``
calibrated on fields whose continuum deficit is zero (see
:func:`calibrate_eps_disc`).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .fields import GridSpec, ScalarField, _corner_stencils, dirichlet_energy, holder_seminorm
from .polar import PolarField, PolarSpec, polar_energy
from .symmetrize import (axial_average, axial_sweep, cap_rearrange, gradient_split,
                         sweep_directions, tangential_energy)

EXACT_RTOL = 1e-12


@dataclass(frozen=True)
class InequalityResult:
    """``lhs <= rhs`` with ``deficit = rhs - lhs``; passes iff ``deficit >= -tolerance``."""

    name: str
    lhs: float
    rhs: float
    deficit: float
    tolerance: float
    passed: bool

    @classmethod
    def make(cls, name: str, lhs: float, rhs: float, tolerance: float) -> "InequalityResult":
        lhs, rhs, tolerance = float(lhs), float(rhs), float(tolerance)
        deficit = rhs - lhs if not (math.isinf(rhs) and math.isinf(lhs)) else 0.0
        return cls(name, lhs, rhs, deficit, tolerance, bool(deficit >= -tolerance))

    def to_dict(self) -> dict:
        return asdict(self)


def _exact_tol(rhs: float) -> float:
    return EXACT_RTOL * max(1.0, abs(rhs))


# ---------------------------------------------------------------- Clarkson

def clarkson_pointwise(a, b, p: float) -> InequalityResult:
    """``|(a+b)/2|^p + |(a-b)/2|^p <= |a|^p/2 + |b|^p/2`` for ``p >= 2``.

    ``a`` and ``b`` may be single vectors or stacks of shape ``(m, n)``; the
    result reports the pair with the smallest relative deficit.
    """
    if p < 2:
        raise ValueError("Clarkson's inequality needs p >= 2")
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    norm = lambda v: np.sqrt((v * v).sum(axis=-1)) ** p  # noqa: E731
    lhs = norm(0.5 * (a + b)) + norm(0.5 * (a - b))
    rhs = 0.5 * norm(a) + 0.5 * norm(b)
    rel = (rhs - lhs) / np.maximum(1.0, np.abs(rhs))
    k = int(np.argmin(rel))
    return InequalityResult.make("clarkson_pointwise", lhs[k], rhs[k], _exact_tol(rhs[k]))


def clarkson_fields(v: ScalarField, w: ScalarField) -> InequalityResult:
    """Integrated Clarkson inequality for the discrete energy."""
    if v.spec != w.spec:
        raise ValueError("fields live on different grids")
    lhs = dirichlet_energy((v + w) * 0.5) + dirichlet_energy((v - w) * 0.5)
    rhs = 0.5 * dirichlet_energy(v) + 0.5 * dirichlet_energy(w)
    return InequalityResult.make("clarkson_fields", lhs, rhs, _exact_tol(rhs))


# ------------------------------------------------------------ axial family

def polya_szego_axial(field: ScalarField, tolerance: float | None = None) -> InequalityResult:
    """``E(u*) <= E(u) - int |D_S u|^p``."""
    lhs = dirichlet_energy(axial_average(field))
    rhs = dirichlet_energy(field) - tangential_energy(field)
    tol = _exact_tol(rhs) if tolerance is None else tolerance
    return InequalityResult.make("polya_szego_axial", lhs, rhs, tol)


def gradient_split_elementary(field: ScalarField) -> InequalityResult:
    """``|(D_r u, u_{x_n})|^p + |D_S u|^p <= |Du|^p`` on every corner stencil.

    For ``n = 2`` the two parts are not orthogonal and the right side is the
    elementary bound ``(|a|^2 + |b|^2)^(p/2)`` itself.
    """
    spec = field.spec
    p = spec.p
    split = gradient_split(field)
    a2 = (split.radial_corners**2).sum(axis=-1)
    b2 = (split.tangential_corners**2).sum(axis=-1)
    lhs = a2 ** (0.5 * p) + b2 ** (0.5 * p)
    if spec.n == 3:
        g2 = (_corner_stencils(field) ** 2).sum(axis=-1)
        rhs = g2 ** (0.5 * p)
    else:
        rhs = (a2 + b2) ** (0.5 * p)
    rel = (rhs - lhs) / np.maximum(1.0, rhs)
    k = np.unravel_index(int(np.argmin(rel)), rel.shape)
    return InequalityResult.make("gradient_split_elementary", lhs[k], rhs[k], _exact_tol(rhs[k]))


def hardy_candidate(n: int, p: float) -> float:
    """Candidate constant: the one-dimensional Hardy constant for n=2, none for n=3."""
    return (p / (p - 1)) ** p if n == 2 else math.inf


def hardy_type_axial(field: ScalarField, bound: float | None = None,
                     tolerance: float = 0.0) -> InequalityResult:
    """Ratio ``int |u - u*|^p / |y|^p  /  int |D_S u|^p`` against ``bound``.

    The left integral is a node sum over ``y != 0``.  ``lhs`` of the result is
    the ratio (``inf`` if the tangential energy vanishes while the left
    integral does not, ``0`` if both vanish).
    """
    spec = field.spec
    p = spec.p
    bound = hardy_candidate(spec.n, p) if bound is None else bound
    ustar = axial_average(field)
    coords = spec.coords()
    ry = np.sqrt(sum(c**2 for c in coords[:-1]))
    ry = np.broadcast_to(ry, spec.shape)
    off = ry > 0
    diff = np.abs(field.values - ustar.values)
    num = float((diff[off] ** p / ry[off] ** p).sum()) * spec.h**spec.n
    den = tangential_energy(field)
    if den > 0:
        ratio = num / den
    else:
        ratio = 0.0 if num <= _exact_tol(0.0) else math.inf
    return InequalityResult.make("hardy_type_axial", ratio, bound, tolerance)


def sweep_average(field: ScalarField, directions=None, weights=None,
                  tolerance: float | None = None) -> InequalityResult:
    """Average of ``E(u^zeta)`` over ``zeta`` against ``E(u)`` (n=2) or
    ``E(u) - int |D_S u|^p`` (n=3)."""
    spec = field.spec
    if directions is None:
        directions, weights = sweep_directions(spec.n)
    directions = np.asarray(directions, dtype=float).reshape(-1, spec.n - 1)
    if len(directions) == 0:
        raise ValueError("need at least one direction")
    if weights is None:
        weights = np.full(len(directions), 1.0 / len(directions))
    weights = np.asarray(weights, dtype=float)
    lhs = sum(w * dirichlet_energy(axial_sweep(field, z)) for z, w in zip(directions, weights))
    lhs /= weights.sum()
    rhs = dirichlet_energy(field)
    if spec.n >= 3:
        rhs -= tangential_energy(field)
    tol = _exact_tol(rhs) if tolerance is None else tolerance
    return InequalityResult.make("sweep_average", lhs, rhs, tol)


def polya_szego_cap(pfield: PolarField, p: float, tolerance: float | None = None) -> InequalityResult:
    """``E(v*) <= E(v)`` with the polar-grid energy."""
    lhs = polar_energy(cap_rearrange(pfield), p)
    rhs = polar_energy(pfield, p)
    tol = _exact_tol(rhs) if tolerance is None else tolerance
    return InequalityResult.make("polya_szego_cap", lhs, rhs, tol)


def morrey_inequality_check(field: ScalarField, C_candidate: float,
                            rel_tol: float = 0.02) -> InequalityResult:
    """``[u] <= C E^(1/p)`` with tolerance ``rel_tol`` relative to the right side."""
    lhs, _ = holder_seminorm(field)
    rhs = C_candidate * dirichlet_energy(field) ** (1.0 / field.spec.p)
    return InequalityResult.make("morrey", lhs, rhs, rel_tol * rhs)


# ------------------------------------------------------------------ corpora

def radial_cutoff(r, R):
    """``(1 - (r/R)^2)^3`` inside the ball of radius ``R``, zero outside (C^2)."""
    s = np.clip(1.0 - (np.asarray(r) / R) ** 2, 0.0, None)
    return s**3


def random_smooth_field(spec: GridSpec, rng: np.random.Generator, terms: int = 4,
                        smoothness: float = 0.3) -> ScalarField:
    """Sum of Gaussian bumps with random signs, centres and widths, cut off
    smoothly inside the ball of radius ``L``.  Widths scale with ``smoothness * L``."""
    L = spec.L
    x = spec.coords()
    r2 = sum(c**2 for c in x)
    total = 0.0
    for _ in range(terms):
        centre = rng.uniform(-0.5 * L, 0.5 * L, spec.n)
        width = smoothness * L * rng.uniform(0.6, 1.4)
        amp = rng.normal()
        d2 = sum((c - m) ** 2 for c, m in zip(x, centre))
        total = total + amp * np.exp(-d2 / width**2)
    vals = np.broadcast_to(total * radial_cutoff(np.sqrt(r2), L), spec.shape)
    return ScalarField(spec, vals)


def axisymmetric_field(spec: GridSpec, rng: np.random.Generator, terms: int = 4,
                       smoothness: float = 0.3) -> ScalarField:
    """Random smooth function of ``(|y|, x_n)``, cut off inside the ball of radius ``L``."""
    L = spec.L
    x = spec.coords()
    y2 = sum(c**2 for c in x[:-1])
    z = x[-1]
    total = 0.0
    for _ in range(terms):
        width = smoothness * L * rng.uniform(0.6, 1.4)
        zc = rng.uniform(-0.5 * L, 0.5 * L)
        amp = rng.normal()
        bend = rng.uniform(-1.0, 1.0)
        total = total + amp * (1 + bend * y2 / width**2) * np.exp(-(y2 + (z - zc) ** 2) / width**2)
    vals = np.broadcast_to(total * radial_cutoff(np.sqrt(y2 + z**2), L), spec.shape)
    return ScalarField(spec, vals)


def _cartesian_bumps(pts, rng, n, R, terms, smoothness, axis=None):
    total = np.zeros(pts.shape[:-1])
    for _ in range(terms):
        width = smoothness * R * rng.uniform(0.6, 1.4)
        if axis is None:
            centre = rng.uniform(-0.6 * R, 0.6 * R, n)
            amp = rng.normal()
        else:
            centre = rng.uniform(0.0, 0.8 * R) * axis
            amp = rng.uniform(0.2, 1.0)
        total += amp * np.exp(-((pts - centre) ** 2).sum(axis=-1) / width**2)
    return total


def random_polar_field(pspec: PolarSpec, rng: np.random.Generator, terms: int = 4,
                       smoothness: float = 0.3) -> PolarField:
    """Random smooth function sampled exactly at the polar nodes."""
    pts = pspec.cartesian_points()
    return PolarField(pspec, _cartesian_bumps(pts, rng, pspec.n, pspec.t_max, terms, smoothness))


def tilted_cap_field(pspec: PolarSpec, rng: np.random.Generator, terms: int = 4,
                     smoothness: float = 0.3) -> PolarField:
    """A field that decreases in the angle from a random axis ``omega``:
    positive bumps centred on the ray ``R_+ omega``.  Its cap rearrangement is
    the same field rotated onto ``e_n``, so the continuum deficit is zero."""
    omega = rng.normal(size=pspec.n)
    omega /= np.linalg.norm(omega)
    pts = pspec.cartesian_points()
    return PolarField(pspec, _cartesian_bumps(pts, rng, pspec.n, pspec.t_max, terms,
                                              smoothness, axis=omega))


# ------------------------------------------------------------- calibration

CALIBRATION_COUNT = 20
CALIBRATION_FACTOR = 10.0


def _axial_deficit(kind):
    if kind == "polya_szego_axial":
        return lambda f: polya_szego_axial(f)
    if kind == "sweep_average":
        return lambda f: sweep_average(f)
    raise ValueError(f"unknown check {kind!r}")


@dataclass(frozen=True)
class Calibration:
    kind: str
    eps_disc: float
    max_abs_deficit: float
    count: int


def calibrate_eps_disc(kind: str, grid, count: int = CALIBRATION_COUNT, seed: int = 0,
                       smoothness: float = 0.3) -> Calibration:
    """``eps_disc`` = 10 x the largest ``|deficit|`` over ``count`` fields whose
    continuum deficit is zero.

    Axial checks (``polya_szego_axial``, ``sweep_average``) use random
    axisymmetric fields on the :class:`GridSpec` ``grid``; ``polya_szego_cap``
    uses fields that are cap symmetric about a random axis on the
    :class:`PolarSpec` ``grid`` (``p`` is read from ``grid.p`` if present,
    else must be supplied as ``(pspec, p)``).  A rounding floor of
    ``1e-12 x`` the largest right side keeps the tolerance positive when the
    discrete check is exact.
    """
    rng = np.random.default_rng(seed)
    worst, scale = 0.0, 0.0
    for _ in range(count):
        if kind == "polya_szego_cap":
            pspec, p = grid
            res = polya_szego_cap(tilted_cap_field(pspec, rng, smoothness=smoothness), p)
        else:
            res = _axial_deficit(kind)(axisymmetric_field(grid, rng, smoothness=smoothness))
        worst = max(worst, abs(res.deficit))
        scale = max(scale, abs(res.rhs))
    eps = max(CALIBRATION_FACTOR * worst, EXACT_RTOL * max(1.0, scale))
    return Calibration(kind, eps, worst, count)


def corpus_sweep(kind: str, grid, count: int, seed: int = 0, smoothness: float = 0.3,
                 eps_disc: float | None = None) -> list[InequalityResult]:
    """Run one checker over a seeded corpus of random smooth fields.

    ``kind`` is one of ``clarkson_fields``, ``polya_szego_axial``,
    ``sweep_average``, ``polya_szego_cap``, ``gradient_split_elementary`` or
    ``hardy_type_axial``.  For ``polya_szego_cap`` pass ``grid = (pspec, p)``.
    """
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        if kind == "polya_szego_cap":
            pspec, p = grid
            out.append(polya_szego_cap(random_polar_field(pspec, rng, smoothness=smoothness), p,
                                       tolerance=eps_disc))
            continue
        f = random_smooth_field(grid, rng, smoothness=smoothness)
        if kind == "clarkson_fields":
            out.append(clarkson_fields(f, random_smooth_field(grid, rng, smoothness=smoothness)))
        elif kind == "polya_szego_axial":
            out.append(polya_szego_axial(f, tolerance=eps_disc))
        elif kind == "sweep_average":
            out.append(sweep_average(f, tolerance=eps_disc))
        elif kind == "gradient_split_elementary":
            out.append(gradient_split_elementary(f))
        elif kind == "hardy_type_axial":
            out.append(hardy_type_axial(f, tolerance=eps_disc or 0.0))
        else:
            raise ValueError(f"unknown check {kind!r}")
    return out
