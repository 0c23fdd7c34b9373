from __future__ import annotations

import math

import numpy as np
import pytest

from morrey import GridSpec, ScalarField, dirichlet_energy
from morrey.extremal import (DivergenceError, SolverConfig, StaleSolutionError,
                             estimate_sharp_constant, initial_field, pde_residual,
                             recover_source_strength, solution_from_field, solve_extremal,
                             uniqueness_probe)

SMALL = GridSpec(2, 2.0, 1 / 8, 4.0)


@pytest.fixture(scope="module")
def small():
    return solve_extremal(SMALL)


@pytest.mark.parametrize("kwargs", [dict(step_rule="sgd"), dict(init="ones"),
                                    dict(grad_tol=0.0), dict(max_iters=0)])
def test_config_rejects(kwargs):
    with pytest.raises(ValueError):
        SolverConfig(**kwargs)


def test_initial_states_pin_and_vanish():
    for init in ("two-spike", "zero", "random"):
        u = initial_field(SMALL, SolverConfig(init=init, seed=3))
        assert u[SMALL.north] == 1.0 and u[SMALL.south] == -1.0
        assert np.all(u[SMALL.boundary_mask()] == 0.0)


def test_small_solve(small):
    assert small.converged
    assert small.field(SMALL.north) == 1.0 and small.field(SMALL.south) == -1.0
    assert np.all(np.diff(small.energy_history) <= 0.0)
    assert small.energy == pytest.approx(dirichlet_energy(small.field), rel=1e-14)
    res = pde_residual(small.field)
    free = ~SMALL.boundary_mask()
    free[SMALL.north] = free[SMALL.south] = False
    src = recover_source_strength(small)
    assert np.abs(res[free]).max() < 1e-6 * src.value
    assert src.relative_gap < 1e-5


def test_energy_below_other_admissible_fields(small):
    rng = np.random.default_rng(0)
    free = ~SMALL.boundary_mask()
    free[SMALL.north] = free[SMALL.south] = False
    for _ in range(5):
        v = small.field.values.copy()
        v[free] += 1e-3 * rng.normal(size=free.sum())
        assert dirichlet_energy(ScalarField(SMALL, v)) >= small.energy


def test_sharp_constant_fields(small):
    sc = estimate_sharp_constant(small)
    assert sc.two_point_quotient == pytest.approx(2 ** (SMALL.n / SMALL.p))
    assert sc.C_star == pytest.approx(small.seminorm / small.energy ** 0.25)
    assert sc.seminorm_ratio >= 1.0 - 1e-12


def test_pin_scaling():
    sol = solve_extremal(SMALL, SolverConfig(pin_values=(2.0, -2.0)))
    base = solve_extremal(SMALL)
    assert sol.energy == pytest.approx(2**4 * base.energy, rel=1e-6)
    assert estimate_sharp_constant(sol).C_star == pytest.approx(
        estimate_sharp_constant(base).C_star, rel=1e-6)


@pytest.mark.parametrize("rule", ["adaptive-two-point", "fixed"])
def test_other_step_rules_descend(rule):
    sol = solve_extremal(SMALL, SolverConfig(step_rule=rule, max_iters=300))
    assert np.all(np.diff(sol.energy_history) <= 0.0)
    assert sol.energy < sol.energy_history[0]


def test_divergence_raises():
    with pytest.raises(DivergenceError, match="divergence at iteration 1"):
        solve_extremal(SMALL, SolverConfig(step_rule="fixed", fixed_step=1e300, max_iters=5))


def test_stale_solution():
    sol = solve_extremal(SMALL, SolverConfig(max_iters=2))
    assert not sol.converged
    with pytest.raises(StaleSolutionError):
        recover_source_strength(sol)


def test_source_routes_disagree_raises(small):
    # a pinned field that is far from stationary
    u = small.field.values.copy()
    u[5, 5] += 0.5
    sol = solution_from_field(ScalarField(SMALL, u))
    with pytest.raises(ValueError, match="disagree"):
        recover_source_strength(sol)
    assert recover_source_strength(sol, rtol=math.inf).relative_gap > 1e-3


def test_one_dimensional_closed_form():
    sol = solve_extremal(GridSpec(1, 3.0, 1 / 8, 3.0))
    # linear on [-1, 1], then slope 1/2 over the remaining length 2 on each side
    assert sol.energy == pytest.approx(2 + 2 * 2 * 0.5**3, rel=1e-6)


def test_uniqueness_probe_small():
    assert uniqueness_probe(SMALL, SolverConfig(), [0, 1, "zero"]) < 1e-4
    with pytest.raises(ValueError):
        uniqueness_probe(SMALL, SolverConfig(), [0])


def test_callback_sees_every_iterate():
    seen = []
    sol = solve_extremal(SMALL, callback=lambda it, v: seen.append((it, v.flags.writeable)))
    assert [s[0] for s in seen] == list(range(sol.iterations + 1))
    assert not any(s[1] for s in seen)


def test_summary_keys(small):
    keys = set(small.summary())
    assert {"energy", "seminorm", "sharp_constant", "source_strength", "iterations",
            "converged"} <= keys


def test_antisymmetry_preserved_every_iterate():
    worst = []
    solve_extremal(SMALL, callback=lambda it, v: worst.append(np.abs(v + v[:, ::-1]).max()))
    assert max(worst) <= 1e-12
