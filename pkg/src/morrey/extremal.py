"""Normalised Morrey extremal by constrained minimisation of the discrete
p-Dirichlet energy.

The free unknowns are all nodal values except the two pins ``u(+-e_n)`` and
the box boundary (held at zero).  Fixed entries are never written to, so the
constraints hold bit-exactly at every iterate.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field, replace
from typing import Callable, NamedTuple

import numpy as np

from . import kernels
from .fields import (GridSpec, ScalarField, SmoothingKernel, dirichlet_energy,
                     energy_gradient, holder_seminorm, mollify)

log = logging.getLogger(__name__)

STEP_RULES = ("ncg", "adaptive-two-point", "fixed")
INITS = ("two-spike", "zero", "random")


class DivergenceError(ArithmeticError):
    """Non-finite energy during the descent."""


class StaleSolutionError(ValueError):
    """A diagnostic was requested from a non-converged solution."""


@dataclass(frozen=True)
class SolverConfig:
    """Descent settings.

    ``grad_tol`` is relative: the run stops once the projected gradient norm
    falls below ``grad_tol`` times the projected gradient norm of the
    two-spike starting state on the same grid (whatever ``init`` is used), so
    runs from different initialisations meet the same absolute target.
    """

    max_iters: int = 200_000
    grad_tol: float = 1e-8
    step_rule: str = "ncg"
    init: str = "two-spike"
    seed: int = 0
    pin_values: tuple[float, float] = (1.0, -1.0)
    fixed_step: float | None = None

    def __post_init__(self):
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not self.max_iters > 0:
            raise ValueError("max_iters must be positive")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        object.__setattr__(self, "pin_values", tuple(float(v) for v in self.pin_values))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["pin_values"] = list(self.pin_values)
        return d


@dataclass(frozen=True, eq=False)
class ExtremalSolution:
    field: ScalarField
    energy: float
    seminorm: float
    argmax_pair: tuple[np.ndarray, np.ndarray]
    source_strength: float
    sharp_constant: float
    iterations: int
    final_grad_norm: float
    converged: bool
    energy_history: np.ndarray = dc_field(repr=False)
    grad_tol_abs: float = math.nan
    config: SolverConfig | None = None

    @property
    def spec(self) -> GridSpec:
        return self.field.spec

    def summary(self) -> dict:
        return {
            "energy": self.energy,
            "seminorm": self.seminorm,
            "sharp_constant": self.sharp_constant,
            "source_strength": self.source_strength,
            "iterations": self.iterations,
            "converged": self.converged,
            "final_grad_norm": self.final_grad_norm,
            "argmax_pair": [list(map(float, x)) for x in self.argmax_pair],
        }


def fixed_mask(spec: GridSpec) -> np.ndarray:
    mask = spec.boundary_mask()
    mask[spec.north] = True
    mask[spec.south] = True
    return mask


def initial_field(spec: GridSpec, cfg: SolverConfig) -> np.ndarray:
    top, bottom = cfg.pin_values
    u = np.zeros(spec.shape)
    if cfg.init == "two-spike":
        u[spec.north] = top
        u[spec.south] = bottom
        eps = 4 * spec.h
        u = mollify(ScalarField(spec, u), SmoothingKernel(eps)).values.copy()
    elif cfg.init == "random":
        rng = np.random.default_rng(cfg.seed)
        u = rng.uniform(-1.0, 1.0, spec.shape)
    u[spec.boundary_mask()] = 0.0
    u[spec.north] = top
    u[spec.south] = bottom
    return u


def _line_search(u, d, h, p):
    """Safeguarded Newton for ``phi'(a) = 0`` on the convex ``phi(a) = E(u + a d)``."""
    _, s0, c0 = kernels.line_derivatives(u, d, h, p, 0.0)
    if not s0 < 0:
        return 0.0
    lo, hi = 0.0, math.inf
    a = -s0 / c0 if c0 > 0 else 1.0
    for _ in range(60):
        _, s, c = kernels.line_derivatives(u, d, h, p, a)
        if not math.isfinite(s):
            hi = a
            a = 0.5 * (lo + a)
            continue
        if abs(s) <= 1e-9 * abs(s0):
            break
        if s < 0:
            lo = a
        else:
            hi = a
        nxt = a - s / c if c > 0 else math.nan
        if not (lo < nxt < hi):
            nxt = 0.5 * (lo + hi) if math.isfinite(hi) else 2.0 * a
        if abs(nxt - a) <= 1e-13 * abs(a):
            a = nxt
            break
        a = nxt
    return a


def _project(g, free):
    return np.where(free, g, 0.0)


def solve_extremal(spec: GridSpec, cfg: SolverConfig | None = None,
                   callback: Callable[[int, np.ndarray], None] | None = None,
                   initial: np.ndarray | None = None) -> ExtremalSolution:
    """Minimise the discrete energy subject to ``u(+-e_n) = pin_values`` and
    zero boundary values.

    ``callback(iteration, values)`` sees every accepted iterate (read-only).
    ``initial`` overrides ``cfg.init``; its fixed entries are reset.
    """
    cfg = cfg or SolverConfig()
    h, p = spec.h, spec.p
    free = ~fixed_mask(spec)

    ref_cfg = replace(cfg, init="two-spike")
    _, g_ref = energy_gradient(ScalarField(spec, initial_field(spec, ref_cfg)))
    ref = float(np.linalg.norm(_project(g_ref, free)))
    tol = cfg.grad_tol * ref

    if initial is None:
        u = initial_field(spec, cfg)
    else:
        u = np.array(initial, dtype=float)
        u[~free] = initial_field(spec, replace(cfg, init="zero"))[~free]
    E, g = kernels.energy_and_gradient(u, h, p)
    g = _project(g, free)
    gnorm = float(np.linalg.norm(g))
    history = [E]
    view = u.view()
    view.setflags(write=False)
    if callback:
        callback(0, view)

    it = 0
    if cfg.step_rule == "ncg":
        z = _precondition(u, g, free, h, p)
        d = -z
    else:
        d = -g
    step = cfg.fixed_step
    if cfg.step_rule == "fixed" and step is None:
        diag = kernels.hessian_diagonal(u, h, p)
        step = 1.0 / max(float(diag[free].max()), 1e-300)
    prev_u = prev_g = None

    while gnorm > tol and it < cfg.max_iters:
        it += 1
        if cfg.step_rule == "ncg":
            alpha = _line_search(u, d, h, p)
        elif cfg.step_rule == "fixed":
            alpha = step
        else:
            if prev_u is None:
                alpha = _line_search(u, d, h, p)
            else:
                s_vec = u - prev_u
                y_vec = g - prev_g
                sy = float(np.vdot(s_vec, y_vec))
                alpha = float(np.vdot(s_vec, s_vec)) / sy if sy > 0 else _line_search(u, d, h, p)

        u_new, E_new, g_new = None, math.inf, None
        for _ in range(60):
            cand = u + alpha * d
            E_c, g_c = kernels.energy_and_gradient(cand, h, p)
            if not math.isfinite(E_c):
                if alpha == 0.0:
                    raise DivergenceError(f"divergence at iteration {it}")
                alpha *= 0.5
                continue
            if E_c <= E:
                u_new, E_new, g_new = cand, E_c, g_c
                break
            alpha *= 0.5
        if u_new is None:
            if not math.isfinite(E_c):
                raise DivergenceError(f"divergence at iteration {it}")
            if cfg.step_rule == "ncg" and not np.array_equal(d, -z):
                d = -z
                it -= 1
                continue
            log.info("descent stalled at iteration %d (|g|=%.3e, tol=%.3e)", it, gnorm, tol)
            it -= 1
            break
        if cfg.step_rule == "fixed":
            step = alpha
        prev_u, prev_g = u, g
        u, E = u_new, E_new
        g = _project(g_new, free)
        gnorm = float(np.linalg.norm(g))
        history.append(E)
        if callback:
            view = u.view()
            view.setflags(write=False)
            callback(it, view)

        if cfg.step_rule == "ncg":
            z_new = _precondition(u, g, free, h, p)
            beta = max(0.0, float(np.vdot(z_new, g - prev_g)) / float(np.vdot(z, prev_g)))
            d = -z_new + beta * d
            if float(np.vdot(d, g)) >= 0:
                d = -z_new
            z = z_new
        else:
            d = -g

    converged = gnorm <= tol
    if not converged:
        log.warning("solver stopped after %d iterations without reaching tolerance "
                    "(|g|=%.3e > %.3e)", it, gnorm, tol)
    fieldu = ScalarField(spec, u)
    return _make_solution(fieldu, iterations=it, final_grad_norm=gnorm, converged=converged,
                          history=np.array(history), grad_tol_abs=tol, config=cfg)


def _precondition(u, g, free, h, p, floor=1e-3):
    diag = kernels.hessian_diagonal(u, h, p)
    top = float(diag[free].max()) if free.any() else 0.0
    if top <= 0:
        return g.copy()
    return np.where(free, g / np.maximum(diag, floor * top), 0.0)


def _make_solution(field: ScalarField, iterations=0, final_grad_norm=math.nan, converged=True,
                   history=None, grad_tol_abs=math.nan, config=None) -> ExtremalSolution:
    E = dirichlet_energy(field)
    semi, pair = holder_seminorm(field)
    sharp = semi / E ** (1.0 / field.spec.p) if E > 0 else math.nan
    return ExtremalSolution(
        field=field, energy=E, seminorm=semi, argmax_pair=pair, source_strength=E / 2,
        sharp_constant=sharp, iterations=iterations, final_grad_norm=final_grad_norm,
        converged=converged,
        energy_history=np.array([E]) if history is None else history,
        grad_tol_abs=grad_tol_abs, config=config)


def solution_from_field(field: ScalarField, converged: bool = True) -> ExtremalSolution:
    """Wrap an arbitrary field (diagnostics, scaled copies, loaded files)."""
    return _make_solution(field, converged=converged)


def pde_residual(field: ScalarField) -> np.ndarray:
    """Nodal residual ``-(1/p) dE/du``; for the extremal it is ``~0`` at free
    nodes, ``-c`` at ``e_n`` and ``+c`` at ``-e_n``."""
    _, grad = energy_gradient(field)
    return -grad / field.spec.p


class SourceStrength(NamedTuple):
    value: float
    c_energy: float
    c_residual: float
    relative_gap: float


def recover_source_strength(sol: ExtremalSolution, rtol: float = 1e-3) -> SourceStrength:
    """Source constant ``c`` two ways: ``energy / 2`` and the residual at the pins."""
    if not sol.converged:
        raise StaleSolutionError("stale solution: source strength needs a converged field")
    spec = sol.spec
    res = pde_residual(sol.field)
    c_res = 0.5 * (res[spec.south] - res[spec.north])
    c_en = 0.5 * sol.energy
    gap = abs(c_res - c_en) / c_en if c_en > 0 else abs(c_res)
    if gap > rtol:
        raise ValueError(f"source strength routes disagree: energy/2={c_en:.6g}, "
                         f"residual={c_res:.6g} (relative gap {gap:.2e})")
    return SourceStrength(c_en, c_en, float(c_res), float(gap))


class SharpConstant(NamedTuple):
    C_star: float
    two_point_quotient: float
    seminorm_ratio: float
    relative_gap: float
    pair_distance: float


def estimate_sharp_constant(sol: ExtremalSolution) -> SharpConstant:
    """``C_* ~ [u] / E^(1/p)`` and how close the maximising pair is to ``(e_n, -e_n)``."""
    spec = sol.spec
    top = sol.field(spec.north)
    bottom = sol.field(spec.south)
    tpq = abs(top - bottom) / 2.0 ** spec.alpha
    C = sol.seminorm / sol.energy ** (1.0 / spec.p)
    ratio = sol.seminorm / tpq if tpq > 0 else math.inf
    north = spec.point_of(spec.north)
    south = spec.point_of(spec.south)
    a, b = (np.asarray(x) for x in sol.argmax_pair)
    dist = min(max(np.linalg.norm(a - north), np.linalg.norm(b - south)),
               max(np.linalg.norm(a - south), np.linalg.norm(b - north)))
    return SharpConstant(C, tpq, ratio, ratio - 1.0, float(dist))


def uniqueness_probe(spec: GridSpec, cfg_base: SolverConfig, seeds) -> float:
    """Largest pairwise sup distance between solutions from different starts.

    Integer entries of ``seeds`` mean ``init="random"`` with that seed; string
    entries name an initialisation.
    """
    seeds = list(seeds)
    if len(seeds) < 2:
        raise ValueError("need at least two seeds")
    fields = []
    for s in seeds:
        cfg = replace(cfg_base, init=s) if isinstance(s, str) else replace(cfg_base, init="random", seed=int(s))
        fields.append(solve_extremal(spec, cfg).field.values)
    worst = 0.0
    for i in range(len(fields)):
        for j in range(i + 1, len(fields)):
            worst = max(worst, float(np.abs(fields[i] - fields[j]).max()))
    return worst
