from __future__ import annotations

import numpy as np
import pytest

from morrey import (DomainError, GridSpec, ScalarField, SmoothingKernel, dirichlet_energy, gradient,
                    holder_seminorm, interpolate, mollify, to_polar)
from morrey import _accel, kernels
from morrey.fields import (energy_gradient, read_field_csv, read_spec_json, write_field_csv,
                           write_spec_json)
from morrey.polar import PolarSpec


@pytest.mark.parametrize("kwargs", [
    dict(n=2, L=2.0, h=0.3, p=4.0),     # 1/h not an integer
    dict(n=2, L=2.1, h=0.25, p=4.0),    # L/h not an integer
    dict(n=2, L=2.0, h=0.25, p=2.0),    # p <= n
    dict(n=3, L=2.0, h=0.25, p=3.0),
    dict(n=4, L=2.0, h=0.25, p=8.0),
    dict(n=2, L=1.0, h=0.25, p=4.0),    # poles too close to the wall
])
def test_gridspec_rejects(kwargs):
    with pytest.raises(ValueError):
        GridSpec(**kwargs)


def test_gridspec_geometry():
    s = GridSpec(3, 2.0, 0.25, 4.0)
    assert s.shape == (17, 17, 17)
    assert np.allclose(s.point_of(s.north), [0, 0, 1])
    assert np.allclose(s.point_of(s.south), [0, 0, -1])
    assert s.index_of([0.5, -0.25, 1.0]) == (10, 7, 12)
    assert s.alpha == pytest.approx(0.25)
    assert s.boundary_mask().sum() == 17**3 - 15**3
    assert GridSpec.from_dict(s.to_dict()) == s


@pytest.mark.parametrize("n,p", [(1, 3.0), (2, 4.0), (3, 5.0)])
def test_energy_affine_exact(n, p):
    s = GridSpec(n, 2.0, 0.25, p)
    a = np.array([0.7, -1.3, 0.4][:n])
    f = ScalarField.from_function(s, lambda *x: sum(ai * xi for ai, xi in zip(a, x)))
    expected = np.linalg.norm(a) ** p * (2 * s.L) ** n
    assert dirichlet_energy(f) == pytest.approx(expected, rel=1e-12)
    g = gradient(f)
    assert np.allclose(g.vectors, a) and np.allclose(g.corners, a)


def test_energy_gradient_matches_finite_differences():
    s = GridSpec(2, 2.0, 0.25, 4.0)
    rng = np.random.default_rng(0)
    f = ScalarField(s, rng.normal(size=s.shape))
    _, g = energy_gradient(f)
    eps = 1e-6
    for idx in [(3, 4), (8, 8), (10, 2)]:
        u = f.values.copy()
        u[idx] += eps
        ep = dirichlet_energy(ScalarField(s, u))
        u[idx] -= 2 * eps
        em = dirichlet_energy(ScalarField(s, u))
        assert (ep - em) / (2 * eps) == pytest.approx(g[idx], rel=1e-6)


@pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba unavailable")
@pytest.mark.parametrize("shape", [(33,), (17, 17), (9, 9, 9)])
def test_backends_agree(shape):
    rng = np.random.default_rng(1)
    u = rng.normal(size=shape)
    d = rng.normal(size=shape)
    h = 0.125
    out = {}
    try:
        for b in ("numpy", "numba"):
            _accel.set_backend(b)
            out[b] = (kernels.energy_and_gradient(u, h, 4.0),
                      kernels.line_derivatives(u, d, h, 4.0, 0.3),
                      kernels.hessian_diagonal(u, h, 4.0),
                      kernels.holder_scan(u, h, 0.5))
    finally:
        _accel.set_backend("numba")
    (e0, g0), l0, h0, s0 = out["numpy"]
    (e1, g1), l1, h1, s1 = out["numba"]
    assert e0 == pytest.approx(e1, rel=1e-12)
    assert np.allclose(g0, g1, rtol=1e-11, atol=1e-13)
    assert np.allclose(l0, l1, rtol=1e-11)
    assert np.allclose(h0, h1, rtol=1e-11)
    assert s0[0] == pytest.approx(s1[0], rel=1e-14)


def test_set_backend_rejects_unknown():
    with pytest.raises(ValueError):
        _accel.set_backend("cuda")


def test_holder_exact_matches_brute():
    rng = np.random.default_rng(2)
    for n in (1, 2, 3):
        s = GridSpec(n, 2.0, 0.5, 4.0)
        f = ScalarField(s, rng.normal(size=s.shape))
        v1, (a1, b1) = holder_seminorm(f)
        v2, _ = holder_seminorm(f, "brute")
        assert v1 == pytest.approx(v2, rel=1e-13)
        quot = abs(f.at(a1) - f.at(b1)) / np.linalg.norm(a1 - b1) ** s.alpha
        assert quot == pytest.approx(v1, rel=1e-12)


def test_holder_two_point_field():
    s = GridSpec(2, 2.0, 0.25, 4.0)
    u = np.zeros(s.shape)
    u[s.north], u[s.south] = 1.0, -1.0
    v, (a, b) = holder_seminorm(ScalarField(s, u))
    # 2 / 2^alpha from the pole pair; single pole to a neighbour gives 1 / h^alpha
    assert v == pytest.approx(max(2 / 2**s.alpha, 1 / s.h**s.alpha))


def test_interpolate_and_domain():
    s = GridSpec(2, 2.0, 0.25, 4.0)
    f = ScalarField.from_function(s, lambda x, y: 2 * x - y + 0.5)
    assert interpolate(f, [0.3, -0.7]) == pytest.approx(2 * 0.3 + 0.7 + 0.5)
    with pytest.raises(DomainError):
        interpolate(f, [2.5, 0.0])
    assert interpolate(f, np.array([[2.5, 0.0]]), fill_outside=0.0)[0] == 0.0


def test_to_polar_exact_for_linear():
    s = GridSpec(2, 2.0, 0.25, 4.0)
    f = ScalarField.from_function(s, lambda x, y: y + 0 * x)
    ps = PolarSpec.default(2, 1.5, 0.25)
    pf = to_polar(f, ps)
    t = ps.radii[:, None]
    assert np.allclose(pf.values, t * np.cos(ps.psi)[None, :], atol=1e-13)
    with pytest.raises(DomainError):
        to_polar(f, PolarSpec.default(2, 2.5, 0.25))


def test_mollify_preserves_constants_in_interior():
    s = GridSpec(2, 2.0, 0.125, 4.0)
    f = ScalarField(s, np.ones(s.shape))
    k = SmoothingKernel(4 * s.h)
    assert k.weights(s.h, 2).sum() == pytest.approx(1.0)
    out = mollify(f, k).values
    assert np.allclose(out[8:-8, 8:-8], 1.0)


def test_csv_round_trip(tmp_path):
    s = GridSpec(2, 2.0, 0.5, 4.0)
    f = ScalarField(s, np.random.default_rng(3).normal(size=s.shape))
    write_field_csv(f, tmp_path / "f.csv")
    write_spec_json(s, tmp_path / "g.json")
    s2 = read_spec_json(tmp_path / "g.json")
    assert s2 == s
    assert np.array_equal(read_field_csv(tmp_path / "f.csv", s2).values, f.values)
    with pytest.raises(ValueError):
        read_field_csv(tmp_path / "f.csv", GridSpec(2, 2.0, 0.25, 4.0))
