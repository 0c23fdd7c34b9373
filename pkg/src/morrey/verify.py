"""Quantitative symmetry, monotonicity and fixed-point checks on discrete
fields, aggregated into a :class:`VerificationReport`.

Every check returns a :class:`Check` with the largest violation found and up
to five witness point tuples when it fails.  Tolerances for the
interpolation-limited checks come from running the same check on an
analytic control field that has the expected symmetries exactly (see
:func:`calibrate_tolerances`).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .fields import GridSpec, ScalarField, interpolate, to_polar
from .inequalities import (InequalityResult, calibrate_eps_disc, gradient_split_elementary,
                           hardy_type_axial, morrey_inequality_check, polya_szego_axial,
                           polya_szego_cap, sweep_average)
from .polar import PolarField, PolarSpec
from .symmetrize import cap_rearrange, default_polar_spec, positive_part

MAX_WITNESSES = 5
ROUNDING_FLOOR = 1e-12
CALIBRATION_FACTOR = 10.0


@dataclass
class Check:
    name: str
    max_violation: float
    tolerance: float
    passed: bool
    witnesses: list = dc_field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _finish(name, violations, tolerance, witness_fn, note=""):
    """Build a :class:`Check` from a flat violation array and a function that
    maps flat positions to witness tuples."""
    violations = np.asarray(violations, dtype=float).ravel()
    worst = float(violations.max()) if violations.size else 0.0
    worst = max(worst, 0.0)
    passed = worst <= tolerance
    witnesses = []
    if not passed:
        bad = np.flatnonzero(violations > tolerance)
        bad = bad[np.argsort(-violations[bad], kind="stable")][:MAX_WITNESSES]
        witnesses = [witness_fn(int(k)) for k in bad]
    return Check(name, worst, float(tolerance), bool(passed), witnesses, note)


def _pt(x) -> list[float]:
    return [float(v) for v in np.atleast_1d(x)]


def analysis_radius(spec: GridSpec) -> float:
    """Default radius of the region the checks look at: ``L/2``.  Farther out
    the zero boundary values on the (non-round) box dominate the symmetry
    defects of the truncated problem."""
    return 0.5 * spec.L


def _interior(spec: GridSpec, collar: float | None, radius: float | None = None) -> np.ndarray:
    """Nodes outside the boundary collar (default ``2h``) and inside the ball of
    ``radius`` (default :func:`analysis_radius`; ``inf`` keeps the whole box)."""
    collar = 2 * spec.h if collar is None else collar
    radius = analysis_radius(spec) if radius is None else radius
    r = np.sqrt(sum(c**2 for c in spec.coords()))
    return ~spec.collar_mask(collar) & np.broadcast_to(r <= radius + 1e-12, spec.shape)


def check_polar_spec(spec: GridSpec, radius: float | None = None) -> PolarSpec:
    """Polar grid of the sphere checks: shells every ``h`` out to the analysis radius."""
    radius = analysis_radius(spec) if radius is None else radius
    radius = min(radius, spec.L - 2 * spec.h)
    return PolarSpec.default(spec.n, radius, spec.h)


def _node_points(spec: GridSpec) -> np.ndarray:
    coords = np.meshgrid(*([spec.axis] * spec.n), indexing="ij")
    return np.stack([c.ravel() for c in coords], axis=1)


# ------------------------------------------------------------ symmetry checks

def check_axial_symmetry(field: ScalarField, trials: int = 16, rng_seed: int = 0,
                         tolerance: float = ROUNDING_FLOOR, angles=None,
                         collar: float | None = None, radius: float | None = None) -> Check:
    """``max |u(Ox) - u(x)|`` over rotations ``O`` fixing ``e_n``.

    For ``n = 2`` the only nontrivial ``O`` is ``y -> -y``, which maps nodes to
    nodes.  For ``n = 3``, ``trials`` random angles (or the given ``angles``)
    rotate every node of the analysis region; points whose image lands in the
    collar are skipped and off-grid values are multilinear interpolations.
    """
    spec = field.spec
    collar = 2 * spec.h if collar is None else collar
    inside = _interior(spec, collar, radius)
    u = field.values
    pts = _node_points(spec)
    if spec.n == 2:
        mirrored = u[::-1, :]
        viol = np.where(inside, np.abs(mirrored - u), 0.0).ravel()
        return _finish("axial_symmetry", viol, tolerance,
                       lambda k: [_pt(pts[k]), _pt(pts[k] * [-1, 1])])
    if angles is None:
        angles = np.random.default_rng(rng_seed).uniform(0.0, 2 * np.pi, trials)
    sel = np.flatnonzero(inside.ravel())
    base = pts[sel]
    vals = u.ravel()[sel]
    lim = spec.L - collar + 1e-12
    worst = np.zeros(len(sel))
    image = np.zeros_like(base)
    for phi in np.atleast_1d(angles):
        c, s = math.cos(phi), math.sin(phi)
        rot = base.copy()
        rot[:, 0] = c * base[:, 0] - s * base[:, 1]
        rot[:, 1] = s * base[:, 0] + c * base[:, 1]
        ok = np.all(np.abs(rot) <= lim, axis=1)
        got = interpolate(field, rot[ok])
        v = np.zeros(len(sel))
        v[ok] = np.abs(got - vals[ok])
        better = v > worst
        worst[better] = v[better]
        image[better] = rot[better]
    return _finish("axial_symmetry", worst, tolerance,
                   lambda k: [_pt(base[k]), _pt(image[k])])


def check_antisymmetry(field: ScalarField, tolerance: float = 1e-6) -> Check:
    """``max |u(Tx) + u(x)|`` with ``T`` the grid-exact reflection in ``x_n = 0``."""
    spec = field.spec
    u = field.values
    viol = np.abs(u[..., ::-1] + u).ravel()
    pts = _node_points(spec)
    return _finish("antisymmetry", viol, tolerance,
                   lambda k: [_pt(pts[k]), _pt(pts[k] * ([1] * (spec.n - 1) + [-1]))])


# --------------------------------------------------------- monotone checks

def check_axis_monotonicity(field: ScalarField, tolerance: float = ROUNDING_FLOOR,
                            collar: float | None = None, radius: float | None = None) -> Check:
    """On each slice ``x_n = a > 0``: ``|y2| <= |y1|`` implies ``u(y1) <= u(y2)``
    (reversed for ``a < 0``); on ``x_n = 0``: ``|u| <= tolerance``."""
    spec = field.spec
    inside = _interior(spec, collar, radius)
    u = field.values
    c = spec.center
    shape2 = spec.shape[:-1]
    idx = np.indices(shape2).reshape(spec.n - 1, -1) - c
    r2 = (idx**2).sum(axis=0)
    order = np.argsort(r2, kind="stable")
    r2s = r2[order]
    starts = np.flatnonzero(np.r_[True, r2s[1:] != r2s[:-1]])
    group_end = np.r_[starts[1:], len(r2s)] - 1
    last_of = np.repeat(group_end, np.diff(np.r_[starts, len(r2s)]))
    viol = np.zeros(spec.shape).reshape(-1, spec.shape[-1])
    partner = np.zeros(viol.shape, dtype=np.int64)
    flat_u = u.reshape(-1, spec.shape[-1])
    flat_in = inside.reshape(-1, spec.shape[-1])
    for j in range(spec.shape[-1]):
        keep = flat_in[order, j]
        if not keep.any():
            continue
        sign = 1.0 if j > c else -1.0
        if j == c:
            viol[:, j] = np.where(flat_in[:, j], np.abs(flat_u[:, j]), 0.0)
            partner[:, j] = np.arange(len(r2))
            continue
        vals = np.where(keep, sign * flat_u[order, j], np.inf)
        # running minimum over all radii <= current, ties included
        run = np.minimum.accumulate(vals)
        arg = np.zeros(len(vals), dtype=np.int64)
        best = 0
        for k in range(len(vals)):
            if vals[k] <= vals[best]:
                best = k
            arg[k] = best
        low = run[last_of]
        low_arg = arg[last_of]
        v = np.where(keep, vals - low, 0.0)
        viol[order, j] = v
        partner[order, j] = order[low_arg]
    pts2 = np.indices(shape2).reshape(spec.n - 1, -1).T
    nz = spec.shape[-1]

    def witness(k):
        node, j = divmod(k, nz)
        a = spec.axis[j]
        y1 = spec.axis[pts2[node]]
        y2 = spec.axis[pts2[partner[node, j]]]
        return [_pt(np.r_[y1, a]), _pt(np.r_[y2, a])]

    return _finish("axis_monotonicity", viol.ravel(), tolerance, witness)


def check_sign_pattern(field: ScalarField, collar: float | None = None) -> Check:
    """``u > 0`` on ``x_n > 0`` and ``u < 0`` on ``x_n < 0`` at every non-collar
    node of the box.  A node with the wrong sign (or zero) contributes
    ``max(|u|, tiny)``."""
    spec = field.spec
    inside = _interior(spec, collar, math.inf)
    u = field.values
    z = spec.axis.reshape((1,) * (spec.n - 1) + (-1,))
    sgn = np.broadcast_to(np.sign(z), spec.shape)
    bad = inside & (sgn != 0) & (sgn * u <= 0)
    viol = np.where(bad, np.maximum(np.abs(u), np.finfo(float).tiny), 0.0).ravel()
    pts = _node_points(spec)
    return _finish("sign_pattern", viol, 0.0, lambda k: [_pt(pts[k])])


def _shell_prefix_violation(values: np.ndarray, pspec: PolarSpec):
    """Per shell, ``v_k - min_{theta_j <= theta_k} v_j`` in position order."""
    S = pspec.n_shells
    flat = values.reshape(S, -1)
    pos = pspec.position_order
    theta = pspec.theta_grid.ravel()[pos]
    ordered = flat[:, pos]
    starts = np.flatnonzero(np.r_[True, theta[1:] != theta[:-1]])
    group_end = np.r_[starts[1:], len(theta)] - 1
    last_of = np.repeat(group_end, np.diff(np.r_[starts, len(theta)]))
    run = np.minimum.accumulate(ordered, axis=1)
    low = run[:, last_of]
    viol = ordered - low
    arg = np.zeros(ordered.shape, dtype=np.int64)
    for i in range(S):
        best = 0
        row = ordered[i]
        for k in range(row.size):
            if row[k] <= row[best]:
                best = k
            arg[i, k] = best
    partner = arg[:, last_of]
    return viol, pos, partner


def check_sphere_monotonicity(field: ScalarField, tolerance: float = ROUNDING_FLOOR,
                              pspec: PolarSpec | None = None) -> Check:
    """On every sphere ``|x| = t``: values nonincreasing in the polar angle
    (equal angles must carry equal values)."""
    pspec = check_polar_spec(field.spec) if pspec is None else pspec
    pf = to_polar(field, pspec)
    viol, pos, partner = _shell_prefix_violation(pf.values, pspec)
    pts = pspec.cartesian_points().reshape(pspec.n_shells, -1, pspec.n)
    npos = pos.size

    def witness(k):
        i, m = divmod(k, npos)
        return [_pt(pts[i, pos[m]]), _pt(pts[i, pos[partner[i, m]]])]

    return _finish("sphere_monotonicity", viol.ravel(), tolerance, witness)


def check_quasiconcavity(field: ScalarField, levels=(0.1, 0.25, 0.5, 0.75),
                         pairs: int = 4000, rng_seed: int = 0,
                         tolerance: float = ROUNDING_FLOOR,
                         collar: float | None = None, radius: float | None = None) -> Check:
    """Midpoint test on ``{u >= c, x_n > 0}``: ``u((x+y)/2) >= c`` for random
    pairs of nodes of the set inside the analysis region."""
    spec = field.spec
    rng = np.random.default_rng(rng_seed)
    inside = _interior(spec, collar, radius)
    u = field.values
    pts = _node_points(spec)
    upper = (pts[:, -1] > 0) & inside.ravel()
    viols, wits = [], []
    for c in levels:
        members = np.flatnonzero(upper & (u.ravel() >= c))
        if members.size < 2:
            continue
        a = rng.choice(members, pairs)
        b = rng.choice(members, pairs)
        mid = 0.5 * (pts[a] + pts[b])
        got = interpolate(field, mid)
        viols.append(np.maximum(0.0, c - got))
        wits.extend(zip(a, b))
    viol = np.concatenate(viols) if viols else np.zeros(0)
    return _finish("quasiconcavity", viol, tolerance,
                   lambda k: [_pt(pts[wits[k][0]]), _pt(pts[wits[k][1]])])


def check_superlevel_slices(field: ScalarField, levels=(0.1, 0.25, 0.5, 0.75),
                            collar: float | None = None, radius: float | None = None) -> Check:
    """Each slice ``{y : u(y, a) >= c}`` (``a > 0``) is a centred ball up to a
    one-cell mixed band: the largest member radius exceeds the smallest
    non-member radius by at most ``h``.  The violation is the excess length."""
    spec = field.spec
    inside = _interior(spec, collar, radius)
    c0 = spec.center
    shape2 = spec.shape[:-1]
    r = spec.h * np.sqrt(((np.indices(shape2) - c0) ** 2).sum(axis=0))
    viol, wits = [], []
    for j in range(c0 + 1, spec.shape[-1]):
        sl = field.values[..., j]
        ok = inside[..., j]
        if not ok.any():
            continue
        for c in levels:
            mem = ok & (sl >= c)
            non = ok & (sl < c)
            if not mem.any() or not non.any():
                continue
            r_in = r[mem].max()
            r_out = r[non].min()
            excess = max(0.0, r_in - r_out - spec.h)
            viol.append(excess)
            wits.append((j, c, r_in, r_out))
    return _finish("superlevel_slices", viol, ROUNDING_FLOOR,
                   lambda k: [[float(spec.axis[wits[k][0]]), float(wits[k][1]),
                               float(wits[k][2]), float(wits[k][3])]],
                   note="witness: [x_n, level, largest member radius, smallest non-member radius]")


def ring_maxima(field: ScalarField, radii) -> np.ndarray:
    spec = field.spec
    r = np.sqrt(sum(c**2 for c in spec.coords()))
    r = np.broadcast_to(r, spec.shape)
    out = []
    for R in radii:
        ring = np.abs(r - R) <= 0.5 * spec.h
        out.append(float(np.abs(field.values[ring]).max()) if ring.any() else 0.0)
    return np.array(out)


def check_decay(field: ScalarField, threshold: float = 0.5) -> Check:
    """``max |u|`` on the spheres ``|x| = L/2, 3L/4, 7L/8`` is nonincreasing and
    the outermost value is below ``threshold * max|u|``.  With zero boundary
    values this tests consistency of the truncated problem only."""
    spec = field.spec
    radii = np.array([0.5, 0.75, 0.875]) * spec.L
    m = ring_maxima(field, radii)
    peak = float(np.abs(field.values).max())
    viol = list(np.maximum(0.0, np.diff(m)))
    viol.append(max(0.0, m[-1] - threshold * peak))
    return _finish("decay", viol, ROUNDING_FLOOR,
                   lambda k: [_pt(radii), _pt(m)],
                   note="box truncation forces the decay; this is a consistency check")


def check_extremal_is_cap_fixed(field: ScalarField, tolerance: float = ROUNDING_FLOOR,
                                pspec: PolarSpec | None = None) -> Check:
    """``sup |(u+)* - u+|`` on ``x_n >= 0`` and the same for ``u-`` reflected."""
    spec = field.spec
    pspec = check_polar_spec(spec) if pspec is None else pspec
    pf = to_polar(field, pspec)
    upper = (pspec.theta_grid <= 0.5 * np.pi + 1e-12)
    upper = np.broadcast_to(upper, pspec.shape)
    pos = positive_part(pf)
    d1 = np.where(upper, np.abs(cap_rearrange(pos).values - pos.values), 0.0)
    refl = PolarField(pspec, _reflect_polar(pf.values, pspec))
    neg = positive_part(refl.with_values(-refl.values))
    d2 = np.where(upper, np.abs(cap_rearrange(neg).values - neg.values), 0.0)
    viol = np.maximum(d1, d2).ravel()
    pts = pspec.cartesian_points().reshape(-1, pspec.n)
    return _finish("cap_fixed_point", viol, tolerance, lambda k: [_pt(pts[k])])


def _reflect_polar(values: np.ndarray, pspec: PolarSpec) -> np.ndarray:
    """Values of ``v(Tx)`` on the polar grid (``theta -> pi - theta``)."""
    if pspec.n == 2:
        # psi -> pi - psi (mod 2 pi) maps sample j to N/2 - j (mod N) in index units
        N = pspec.n_angle
        j = np.arange(N) - N // 2 + 1
        src = (N // 2 - j) - (-N // 2 + 1)
        src %= N
        return values[:, src]
    return values[:, ::-1, :]


# ------------------------------------------------------------ calibration

def control_field(spec: GridSpec) -> ScalarField:
    """``([|x + e_n|^b - |x - e_n|^b] / 2^b) * cutoff(|x|)`` with
    ``b = (p - n)/(p - 1)``: axially symmetric, odd under ``T``, increasing in
    ``x_n`` on spheres and decreasing in ``|y|`` on slices, with the same cusp
    at ``+-e_n`` as the extremal."""
    n, p, L = spec.n, spec.p, spec.L
    b = (p - n) / (p - 1)
    x = spec.coords()
    y2 = sum(c**2 for c in x[:-1])
    z = x[-1]
    top = (y2 + (z + 1) ** 2) ** (0.5 * b)
    bot = (y2 + (z - 1) ** 2) ** (0.5 * b)
    r = np.sqrt(y2 + z**2)
    s = np.clip(1 - (r / L) ** 2, 0.0, None) ** 2
    return ScalarField(spec, np.broadcast_to((top - bot) / 2**b * s, spec.shape))


@dataclass(frozen=True)
class Tolerances:
    tol_sym: float
    tol_mono: float
    control: dict

    def to_dict(self) -> dict:
        return asdict(self)


def calibrate_tolerances(spec: GridSpec, trials: int = 16, rng_seed: int = 0,
                         levels=(0.1, 0.25, 0.5, 0.75), factor: float = CALIBRATION_FACTOR,
                         pspec: PolarSpec | None = None) -> Tolerances:
    """``tol_sym`` and ``tol_mono`` as ``factor`` x the violations of the same
    checks on :func:`control_field`, floored at ``1e-12``."""
    ctrl = control_field(spec)
    sym = check_axial_symmetry(ctrl, trials, rng_seed, tolerance=math.inf).max_violation
    cap = check_extremal_is_cap_fixed(ctrl, tolerance=math.inf, pspec=pspec).max_violation
    mono = {
        "axis_monotonicity": check_axis_monotonicity(ctrl, tolerance=math.inf).max_violation,
        "sphere_monotonicity": check_sphere_monotonicity(ctrl, tolerance=math.inf,
                                                         pspec=pspec).max_violation,
        "quasiconcavity": check_quasiconcavity(ctrl, levels, rng_seed=rng_seed,
                                               tolerance=math.inf).max_violation,
    }
    control = {"axial_symmetry": sym, "cap_fixed_point": cap, **mono}
    return Tolerances(max(factor * sym, ROUNDING_FLOOR),
                      max(factor * max(mono.values()), ROUNDING_FLOOR), control)


# ----------------------------------------------------------------- report

@dataclass
class VerifyConfig:
    trials: int = 16
    rng_seed: int = 0
    levels: tuple = (0.1, 0.25, 0.5, 0.75)
    qc_pairs: int = 4000
    antisymmetry_tol: float = 1e-6
    decay_threshold: float = 0.5
    inequalities: bool = True
    enabled: tuple | None = None
    overrides: dict = dc_field(default_factory=dict)

    def wants(self, name: str) -> bool:
        return self.enabled is None or name in self.enabled


@dataclass
class VerificationReport:
    solver: dict
    checks: list
    inequalities: list
    calibration: dict = dc_field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks) and all(r.passed for r in self.inequalities)

    def to_dict(self) -> dict:
        return {"solver": self.solver, "calibration": self.calibration,
                "checks": [c.to_dict() for c in self.checks],
                "inequalities": [r.to_dict() for r in self.inequalities],
                "passed": self.passed}

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2) + "\n"

    def write(self, path) -> None:
        Path(path).write_text(self.to_json())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def run_full_report(sol, cfg: VerifyConfig | None = None) -> VerificationReport:
    """Every check plus the inequality checkers on a solved extremal."""
    cfg = cfg or VerifyConfig()
    field = sol.field
    spec = field.spec
    tols = calibrate_tolerances(spec, cfg.trials, cfg.rng_seed, cfg.levels)
    tol_sym = cfg.overrides.get("tol_sym", tols.tol_sym)
    tol_mono = cfg.overrides.get("tol_mono", tols.tol_mono)
    checks = []
    if cfg.wants("antisymmetry"):
        checks.append(check_antisymmetry(field, cfg.overrides.get("antisymmetry", cfg.antisymmetry_tol)))
    if cfg.wants("axial_symmetry"):
        checks.append(check_axial_symmetry(field, cfg.trials, cfg.rng_seed,
                                           cfg.overrides.get("axial_symmetry", tol_sym)))
    if cfg.wants("sign_pattern"):
        checks.append(check_sign_pattern(field))
    if cfg.wants("axis_monotonicity"):
        checks.append(check_axis_monotonicity(field, cfg.overrides.get("axis_monotonicity", tol_mono)))
    if cfg.wants("sphere_monotonicity"):
        checks.append(check_sphere_monotonicity(field, cfg.overrides.get("sphere_monotonicity", tol_mono)))
    if cfg.wants("quasiconcavity"):
        checks.append(check_quasiconcavity(field, cfg.levels, cfg.qc_pairs, cfg.rng_seed,
                                           cfg.overrides.get("quasiconcavity", tol_mono)))
    if cfg.wants("superlevel_slices"):
        checks.append(check_superlevel_slices(field, cfg.levels))
    if cfg.wants("decay"):
        checks.append(check_decay(field, cfg.decay_threshold))
    if cfg.wants("cap_fixed_point"):
        checks.append(check_extremal_is_cap_fixed(field, cfg.overrides.get("cap_fixed_point", tol_sym)))

    ineqs: list[InequalityResult] = []
    calib = {"tol_sym": tol_sym, "tol_mono": tol_mono, "control": tols.control}
    if cfg.inequalities:
        eps_ax = calibrate_eps_disc("polya_szego_axial", spec).eps_disc
        eps_sw = calibrate_eps_disc("sweep_average", spec).eps_disc
        pspec = default_polar_spec(spec)
        eps_cap = calibrate_eps_disc("polya_szego_cap", (pspec, spec.p)).eps_disc
        calib.update(eps_polya_szego_axial=eps_ax, eps_sweep_average=eps_sw,
                     eps_polya_szego_cap=eps_cap)
        ineqs.append(polya_szego_axial(field, eps_ax))
        ineqs.append(sweep_average(field, tolerance=eps_sw))
        ineqs.append(gradient_split_elementary(field))
        ineqs.append(hardy_type_axial(field))
        ineqs.append(polya_szego_cap(positive_part(to_polar(field, pspec)), spec.p, eps_cap))
        ineqs.append(morrey_inequality_check(field, sol.sharp_constant))
    solver = sol.summary()
    solver["grid"] = spec.to_dict()
    if sol.config is not None:
        solver["config"] = sol.config.to_dict()
    return VerificationReport(solver, checks, ineqs, calib)
