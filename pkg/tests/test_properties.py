"""Property tests for the invariants the operators and checks must satisfy."""
from __future__ import annotations

import numpy as np
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from morrey import (GridSpec, ScalarField, SmoothingKernel, dirichlet_energy, gradient,
                    holder_seminorm, mollify)
from morrey.inequalities import (clarkson_fields, clarkson_pointwise, polya_szego_cap,
                                 random_smooth_field)
from morrey.polar import PolarField, PolarSpec
from morrey.symmetrize import axial_average, cap_rearrange, half_box_energy, odd_extension

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
G2 = GridSpec(2, 2.0, 0.5, 4.0)
P2 = PolarSpec(2, 1.0, 3, 16)
P3 = PolarSpec(3, 1.0, 2, 8, 6)


def _grid_values(spec):
    return arrays(np.float64, spec.shape, elements=finite)


@settings(max_examples=60, deadline=None)
@given(a=arrays(np.float64, (8, 3), elements=finite), b=arrays(np.float64, (8, 3), elements=finite),
       p=st.floats(2.0, 8.0))
def test_clarkson_pointwise_holds(a, b, p):
    assert clarkson_pointwise(a, b, p).passed


@settings(max_examples=40, deadline=None)
@given(u=_grid_values(G2), v=_grid_values(G2))
def test_clarkson_fields_holds(u, v):
    assert clarkson_fields(ScalarField(G2, u), ScalarField(G2, v)).passed


@settings(max_examples=40, deadline=None)
@given(u=_grid_values(G2), lam=st.floats(-5, 5, allow_nan=False))
def test_energy_homogeneous_and_reflection_invariant(u, lam):
    f = ScalarField(G2, u)
    E = dirichlet_energy(f)
    assert np.isclose(dirichlet_energy(f * lam), abs(lam) ** 4 * E, rtol=1e-10, atol=1e-300)
    for flip in (u[::-1, :], u[:, ::-1], u.T):
        assert np.isclose(dirichlet_energy(ScalarField(G2, flip)), E, rtol=1e-12, atol=1e-300)


@settings(max_examples=40, deadline=None)
@given(u=_grid_values(G2), c=finite)
def test_energy_ignores_constants(u, c):
    f = ScalarField(G2, u)
    assert np.isclose(dirichlet_energy(ScalarField(G2, u + c)), dirichlet_energy(f),
                      rtol=1e-9, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(u=_grid_values(G2))
def test_axial_average_n2_idempotent_and_energy_decreasing(u):
    f = ScalarField(G2, u)
    a = axial_average(f)
    assert np.array_equal(axial_average(a).values, a.values)
    assert dirichlet_energy(a) <= dirichlet_energy(f) * (1 + 1e-12) + 1e-300


@settings(max_examples=30, deadline=None)
@given(u=_grid_values(G2))
def test_holder_exact_equals_brute(u):
    f = ScalarField(G2, u)
    assert np.isclose(holder_seminorm(f)[0], holder_seminorm(f, "brute")[0], rtol=1e-13)


@settings(max_examples=40, deadline=None)
@given(data=st.data(), which=st.sampled_from([P2, P3]))
def test_cap_rearrange_permutes_and_is_idempotent(data, which):
    v = data.draw(arrays(np.float64, which.shape, elements=finite))
    pf = PolarField(which, v)
    out = cap_rearrange(pf)
    for i in range(which.n_shells):
        assert np.array_equal(np.sort(out.values[i].ravel()), np.sort(v[i].ravel()))
    assert np.array_equal(cap_rearrange(out).values, out.values)
    # rearrangement commutes with increasing maps and with the positive part
    assert np.array_equal(cap_rearrange(pf.with_values(np.maximum(v, 0))).values,
                          np.maximum(out.values, 0))


@settings(max_examples=30, deadline=None)
@given(data=st.data())
def test_cap_rearrange_lowers_polar_energy(data):
    v = data.draw(arrays(np.float64, P2.shape, elements=st.floats(-1, 1)))
    r = polya_szego_cap(PolarField(P2, v), 4.0)
    assert r.deficit >= -1e-9 * max(1.0, r.rhs)


@settings(max_examples=30, deadline=None)
@given(u=_grid_values(G2))
def test_odd_extension_doubles_half_energy(u):
    u = u.copy()
    u[:, G2.center] = 0.0
    w = odd_extension(ScalarField(G2, u))
    assert np.isclose(dirichlet_energy(w), 2 * half_box_energy(w), rtol=1e-12, atol=1e-300)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.sampled_from([2, 4, 8]))
def test_mollification_bound(seed, k):
    spec = GridSpec(2, 2.0, 1 / 8, 4.0)
    f = random_smooth_field(spec, np.random.default_rng(seed))
    eps = k * spec.h
    semi, _ = holder_seminorm(f)
    err = np.abs(mollify(f, SmoothingKernel(eps)).values - f.values).max()
    assert err <= semi * eps**spec.alpha


@settings(max_examples=30, deadline=None)
@given(u=_grid_values(G2), v=_grid_values(G2))
def test_seminorm_triangle_inequality(u, v):
    fu, fv = ScalarField(G2, u), ScalarField(G2, v)
    lhs = holder_seminorm(fu + fv)[0]
    assert lhs <= (holder_seminorm(fu)[0] + holder_seminorm(fv)[0]) * (1 + 1e-12) + 1e-12


@settings(max_examples=30, deadline=None)
@given(u=_grid_values(G2), v=_grid_values(G2), a=finite, b=finite)
def test_gradient_linear(u, v, a, b):
    lhs = gradient(ScalarField(G2, a * u + b * v)).corners
    rhs = a * gradient(ScalarField(G2, u)).corners + b * gradient(ScalarField(G2, v)).corners
    scale = max(1.0, abs(a) * np.abs(u).max() + abs(b) * np.abs(v).max()) / G2.h
    assert np.abs(lhs - rhs).max() <= 1e-14 * scale


@settings(max_examples=30, deadline=None)
@given(data=st.data(), which=st.sampled_from([P2, P3]))
def test_cap_half_space_and_maximum(data, which):
    """Inputs that are <= 0 on the closed lower hemisphere keep every positive
    superlevel set in the open upper one; the pole carries the shell maximum."""
    v = data.draw(arrays(np.float64, which.shape, elements=st.floats(-1, 1)))
    theta = np.broadcast_to(which.theta_grid, which.shape)
    v = np.where(theta >= np.pi / 2, -np.abs(v), v)
    out = cap_rearrange(PolarField(which, v)).values
    assert np.all(out[theta >= np.pi / 2] <= 0.0)
    first = which.position_order[0]
    for i in range(which.n_shells):
        assert out[i].ravel()[first] == v[i].max()
