"""Spherical-shell grids with exact area weights.

For ``n = 2`` a shell of radius ``t`` carries ``n_angle`` equally spaced
samples ``psi in (-pi, pi]`` measured from ``+e_2``, each of arc length
``t * dpsi``.  For ``n = 3`` the polar angle is split into ``n_angle`` bands
of equal area (uniform in ``cos(theta)``) and the azimuth into ``n_phi``
sectors, so every sample on a shell carries the same exact area
``4 pi t^2 / (n_angle * n_phi)``.  Equal weights make rearrangement on a shell
a plain permutation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class PolarSpec:
    n: int
    t_max: float
    n_shells: int
    n_angle: int
    n_phi: int | None = None

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValueError("polar grids exist for n = 2 and n = 3")
        if self.n_angle % 2:
            raise ValueError("n_angle must be even")
        if self.n == 3 and not self.n_phi:
            raise ValueError("n = 3 needs n_phi")
        if self.n == 2 and self.n_phi is not None:
            raise ValueError("n = 2 takes no n_phi")
        if self.t_max <= 0 or self.n_shells < 1:
            raise ValueError("need t_max > 0 and at least one shell")

    @classmethod
    def default(cls, n: int, t_max: float, dt: float) -> "PolarSpec":
        shells = max(1, round(t_max / dt))
        if n == 2:
            return cls(2, t_max, shells, 256)
        return cls(3, t_max, shells, 128, 64)

    @property
    def dt(self) -> float:
        return self.t_max / self.n_shells

    @cached_property
    def radii(self) -> np.ndarray:
        return self.dt * np.arange(1, self.n_shells + 1)

    @property
    def shape(self) -> tuple[int, ...]:
        if self.n == 2:
            return (self.n_shells, self.n_angle)
        return (self.n_shells, self.n_angle, self.n_phi)

    @property
    def dpsi(self) -> float:
        return 2 * np.pi / self.n_angle

    @property
    def dphi(self) -> float:
        return 2 * np.pi / self.n_phi

    @cached_property
    def psi(self) -> np.ndarray:
        j = np.arange(self.n_angle) - self.n_angle // 2 + 1
        return j * self.dpsi

    @cached_property
    def z_centers(self) -> np.ndarray:
        return 1.0 - (2 * np.arange(self.n_angle) + 1) / self.n_angle

    @cached_property
    def theta(self) -> np.ndarray:
        """Polar angle of each angular sample (``|psi|`` for n=2, ring centres for n=3)."""
        if self.n == 2:
            return np.abs(self.psi)
        return np.arccos(self.z_centers)

    @cached_property
    def phi(self) -> np.ndarray:
        return self.dphi * np.arange(self.n_phi)

    def sphere_measure(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return 2 * np.pi * t if self.n == 2 else 4 * np.pi * t**2

    def cap_measure(self, t, theta) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        theta = np.asarray(theta, dtype=float)
        if self.n == 2:
            return 2 * t * theta
        return 2 * np.pi * t**2 * (1 - np.cos(theta))

    def cap_angle(self, t, mass) -> np.ndarray:
        """Inverse of :meth:`cap_measure` in ``theta``."""
        t = np.asarray(t, dtype=float)
        mass = np.asarray(mass, dtype=float)
        if self.n == 2:
            return np.clip(mass / (2 * t), 0.0, np.pi)
        return np.arccos(np.clip(1 - mass / (2 * np.pi * t**2), -1.0, 1.0))

    @cached_property
    def weights(self) -> np.ndarray:
        t = self.radii
        if self.n == 2:
            w = t[:, None] * self.dpsi * np.ones(self.n_angle)
        else:
            w = t[:, None, None] ** 2 * (2.0 / self.n_angle) * self.dphi * np.ones(self.shape[1:])
        w.setflags(write=False)
        return w

    @cached_property
    def theta_grid(self) -> np.ndarray:
        """Polar angle broadcast to the per-shell sample shape."""
        if self.n == 2:
            return self.theta
        return np.broadcast_to(self.theta[:, None], self.shape[1:])

    @cached_property
    def position_order(self) -> np.ndarray:
        """Flat per-shell sample order of increasing polar angle.

        Ties at equal ``theta`` go to ``+psi`` before ``-psi`` (n=2); within a
        ring (n=3) sectors alternate around ``phi = 0``.
        """
        if self.n == 2:
            return np.lexsort((-self.psi, self.theta))
        k = np.arange(self.n_phi)
        zig = np.empty(self.n_phi, dtype=int)
        zig[0::2] = k[: (self.n_phi + 1) // 2]
        zig[1::2] = (-k[1: self.n_phi // 2 + 1]) % self.n_phi
        rings = np.arange(self.n_angle)[:, None] * self.n_phi
        return (rings + zig[None, :]).ravel()

    def cartesian_points(self) -> np.ndarray:
        """Sample positions, shape ``self.shape + (n,)``."""
        t = self.radii
        if self.n == 2:
            x1 = t[:, None] * np.sin(self.psi)[None, :]
            x2 = t[:, None] * np.cos(self.psi)[None, :]
            return np.stack([x1, x2], axis=-1)
        st = np.sqrt(1 - self.z_centers**2)
        x1 = t[:, None, None] * (st[:, None] * np.cos(self.phi)[None, :])[None]
        x2 = t[:, None, None] * (st[:, None] * np.sin(self.phi)[None, :])[None]
        x3 = t[:, None, None] * np.broadcast_to(self.z_centers[:, None], self.shape[1:])[None]
        return np.stack([x1, x2, x3], axis=-1)


@dataclass(frozen=True, eq=False)
class PolarField:
    spec: PolarSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.spec.shape:
            raise ValueError(f"values have shape {vals.shape}, polar grid needs {self.spec.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, spec: PolarSpec, func) -> "PolarField":
        """``func(t, theta, psi_or_phi)`` evaluated on the broadcast sample grid."""
        t = spec.radii
        if spec.n == 2:
            vals = func(t[:, None], spec.theta[None, :], spec.psi[None, :])
        else:
            vals = func(t[:, None, None], spec.theta[None, :, None], spec.phi[None, None, :])
        return cls(spec, np.broadcast_to(vals, spec.shape))

    @property
    def weights(self) -> np.ndarray:
        return self.spec.weights

    def with_values(self, values) -> "PolarField":
        return PolarField(self.spec, values)

    def shell(self, i: int) -> np.ndarray:
        return self.values[i].ravel()

    def sample(self, points: np.ndarray) -> np.ndarray:
        """Nearest shell in radius, linear in angle (periodic in psi / phi)."""
        sp = self.spec
        pts = np.asarray(points, dtype=float)
        r = np.sqrt((pts**2).sum(axis=1))
        shell = np.clip(np.rint(r / sp.dt).astype(int) - 1, 0, sp.n_shells - 1)
        if sp.n == 2:
            psi = np.arctan2(pts[:, 0], pts[:, 1])
            pos = (psi - sp.psi[0]) / sp.dpsi
            j0 = np.floor(pos).astype(int)
            f = pos - j0
            j0 %= sp.n_angle
            j1 = (j0 + 1) % sp.n_angle
            v = self.values
            return (1 - f) * v[shell, j0] + f * v[shell, j1]
        with np.errstate(invalid="ignore", divide="ignore"):
            z = np.where(r > 0, pts[:, 2] / np.where(r > 0, r, 1.0), 1.0)
        zc = sp.z_centers
        # z_centers decrease with ring index
        pos = np.interp(-z, -zc, np.arange(sp.n_angle, dtype=float))
        j0 = np.clip(np.floor(pos).astype(int), 0, sp.n_angle - 2)
        fj = np.clip(pos - j0, 0.0, 1.0)
        phi = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2 * np.pi)
        posk = phi / sp.dphi
        k0 = np.floor(posk).astype(int) % sp.n_phi
        fk = posk - np.floor(posk)
        k1 = (k0 + 1) % sp.n_phi
        v = self.values
        lo = (1 - fk) * v[shell, j0, k0] + fk * v[shell, j0, k1]
        hi = (1 - fk) * v[shell, j0 + 1, k0] + fk * v[shell, j0 + 1, k1]
        return (1 - fj) * lo + fj * hi


def polar_energy(pfield: PolarField, p: float) -> float:
    """``int |Dv|^p`` over the covered shells by corner-averaged differences in
    spherical coordinates (radial, polar and azimuthal quotients)."""
    sp = pfield.spec
    v = pfield.values
    t = sp.radii
    dt = sp.dt
    if sp.n_shells < 2:
        return 0.0
    tm = 0.5 * (t[1:] + t[:-1])
    if sp.n == 2:
        vr = np.diff(v, axis=0) / dt                       # (S-1, N) radial edges
        va = (np.roll(v, -1, axis=1) - v) / (t[:, None] * sp.dpsi)   # (S, N) angular edges
        total = 0.0
        for a in (0, 1):
            for b in (0, 1):
                gr = np.roll(vr, -b, axis=1)
                ga = va[a:a + sp.n_shells - 1]
                total = total + (gr**2 + ga**2) ** (0.5 * p)
        vol = tm[:, None] * dt * sp.dpsi
        return float((vol * total / 4).sum())
    th = sp.theta
    zc = sp.z_centers
    st = np.sqrt(1 - zc**2)
    vr = np.diff(v, axis=0) / dt                                        # (S-1, J, K)
    vt = np.diff(v, axis=1) / (t[:, None, None] * np.diff(th)[None, :, None])   # (S, J-1, K)
    vp = (np.roll(v, -1, axis=2) - v) / (t[:, None, None] * st[None, :, None] * sp.dphi)  # (S, J, K)
    S, J = sp.n_shells, sp.n_angle
    total = 0.0
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                gr = np.roll(vr[:, b:b + J - 1], -c, axis=2)
                gt = np.roll(vt[a:a + S - 1], -c, axis=2)
                gp = vp[a:a + S - 1, b:b + J - 1]
                total = total + (gr**2 + gt**2 + gp**2) ** (0.5 * p)
    band = (zc[:-1] - zc[1:])
    vol = tm[:, None, None] ** 2 * band[None, :, None] * dt * sp.dphi
    return float((vol * total / 8).sum())


def write_polar_csv(pfield: PolarField, path) -> None:
    """Columns ``t,theta,phi,weight,value`` (n=3) or ``t,theta,psi,weight,value`` (n=2)."""
    sp = pfield.spec
    t = np.broadcast_to(sp.radii.reshape((-1,) + (1,) * (sp.n - 1)), sp.shape)
    theta = np.broadcast_to(sp.theta_grid, sp.shape)
    if sp.n == 2:
        ang = np.broadcast_to(sp.psi, sp.shape)
        header = ["t", "theta", "psi", "weight", "value"]
    else:
        ang = np.broadcast_to(sp.phi, sp.shape)
        header = ["t", "theta", "phi", "weight", "value"]
    cols = [a.ravel() for a in (t, theta, ang, sp.weights, pfield.values)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*cols):
            writer.writerow([repr(float(x)) for x in row])
