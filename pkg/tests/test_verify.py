from __future__ import annotations

import json
import math

import numpy as np
import pytest

from morrey import GridSpec, ScalarField
from morrey.extremal import solution_from_field, solve_extremal
from morrey.verify import (VerifyConfig, calibrate_tolerances, check_antisymmetry,
                           check_axial_symmetry, check_axis_monotonicity, check_decay,
                           check_extremal_is_cap_fixed, check_quasiconcavity, check_sign_pattern,
                           check_sphere_monotonicity, check_superlevel_slices, control_field,
                           run_full_report)

S2 = GridSpec(2, 4.0, 1 / 8, 4.0)
S3 = GridSpec(3, 2.0, 1 / 4, 4.0)


@pytest.fixture(scope="module")
def sol2():
    return solve_extremal(S2)


def test_control_field_properties():
    for s in (S2, S3):
        ctrl = control_field(s)
        assert check_antisymmetry(ctrl, 1e-12).passed
        # compactly supported in the ball |x| <= L, so zero in the box corners
        assert not check_sign_pattern(ctrl).passed
        assert check_superlevel_slices(ctrl).passed
    assert check_axial_symmetry(control_field(S2)).passed


def test_tolerances_are_positive_and_floored():
    t2 = calibrate_tolerances(S2)
    assert t2.tol_sym == pytest.approx(1e-12)
    t3 = calibrate_tolerances(S3)
    assert t3.tol_sym > 1e-6 and t3.tol_mono >= 1e-12
    assert t3.tol_sym == pytest.approx(10 * t3.control["axial_symmetry"])


def test_solution_passes(sol2):
    tols = calibrate_tolerances(S2)
    f = sol2.field
    for chk in (check_antisymmetry(f), check_axial_symmetry(f, tolerance=tols.tol_sym),
                check_axis_monotonicity(f, tols.tol_mono),
                check_sphere_monotonicity(f, tols.tol_mono),
                check_quasiconcavity(f, tolerance=tols.tol_mono), check_superlevel_slices(f),
                check_sign_pattern(f), check_decay(f),
                check_extremal_is_cap_fixed(f, tols.tol_sym)):
        assert chk.passed, chk
        assert chk.witnesses == []


def test_broken_symmetry_gives_witnesses(sol2):
    u = sol2.field.values.copy()
    c = S2.center
    u[c + 3, c + 4] += 0.2           # only one side of the axis
    f = ScalarField(S2, u)
    chk = check_axial_symmetry(f)
    assert not chk.passed and chk.max_violation == pytest.approx(0.2)
    assert len(chk.witnesses) == 2  # the node and its mirror image
    assert not check_antisymmetry(f).passed


def test_wrong_sign_detected(sol2):
    u = sol2.field.values.copy()
    c = S2.center
    u[c + 2, c + 3] = -0.01
    chk = check_sign_pattern(ScalarField(S2, u))
    assert not chk.passed and chk.witnesses == [[[0.25, 0.375]]]


def test_monotonicity_violation_detected(sol2):
    u = sol2.field.values.copy()
    c = S2.center
    u[c + 6, c + 8] += 0.3            # bump off the axis at height 1
    f = ScalarField(S2, u)
    assert not check_axis_monotonicity(f).passed
    assert not check_sphere_monotonicity(f).passed


def test_quasiconcavity_detects_two_bumps():
    s = GridSpec(2, 4.0, 1 / 8, 4.0)
    x, y = s.coords()
    v = np.exp(-((x - 1) ** 2 + (y - 1) ** 2) * 8) + np.exp(-((x + 1) ** 2 + (y - 1) ** 2) * 8)
    chk = check_quasiconcavity(ScalarField(s, v), levels=(0.5,))
    assert not chk.passed


def test_full_report_round_trip(sol2, tmp_path):
    cfg = VerifyConfig(enabled=("antisymmetry", "sign_pattern", "decay"), inequalities=False)
    rep = run_full_report(sol2, cfg)
    assert [c.name for c in rep.checks] == ["antisymmetry", "sign_pattern", "decay"]
    assert rep.passed
    rep.write(tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["passed"] and data["solver"]["converged"]
    assert rep.to_json() == run_full_report(sol2, cfg).to_json()


def test_full_report_with_inequalities(sol2):
    rep = run_full_report(sol2)
    assert rep.passed, [c for c in rep.checks if not c.passed]
    names = {r.name for r in rep.inequalities}
    assert {"polya_szego_axial", "sweep_average", "polya_szego_cap", "morrey"} <= names
    assert math.isfinite(rep.calibration["tol_sym"])


def test_override_tolerance_can_fail(sol2):
    sol = solution_from_field(sol2.field)
    rep = run_full_report(sol, VerifyConfig(enabled=("antisymmetry",), inequalities=False,
                                            overrides={"antisymmetry": -1.0}))
    assert not rep.passed


def test_decay_detector():
    s = GridSpec(2, 4.0, 1 / 8, 4.0)
    assert check_decay(ScalarField.zeros(s)).passed
    x, y = s.coords()
    flat = ScalarField(s, np.broadcast_to(np.tanh(4 * y) + 0 * x, s.shape))
    assert not check_decay(flat).passed
