"""Command line driver: ``morrey solve|verify|symmetrize|sweep|figures``.

Exit codes: 0 success (all enabled checks pass), 1 a check failed or the
solver did not converge, 2 usage or I/O error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict, dataclass, field as dc_field, fields as dc_fields
from pathlib import Path

import numpy as np

from .extremal import SolverConfig, solution_from_field, solve_extremal
from .fields import (GridSpec, ScalarField, read_field_csv, read_spec_json, to_polar,
                     write_field_csv, write_spec_json)
from .inequalities import calibrate_eps_disc, clarkson_pointwise, corpus_sweep
from .polar import PolarSpec, write_polar_csv
from .symmetrize import (axial_average, axial_sweep, cap_rearrange, default_polar_spec,
                         odd_extension, positive_part)
from .verify import VerifyConfig, _jsonable, run_full_report

log = logging.getLogger("morrey")

DEFAULT_GRID = {"n": 2, "L": 8.0, "h": 0.0625, "p": 4.0}
CHECK_NAMES = ("antisymmetry", "axial_symmetry", "sign_pattern", "axis_monotonicity",
               "sphere_monotonicity", "quasiconcavity", "superlevel_slices", "decay",
               "cap_fixed_point")
SWEEP_KINDS = ("clarkson_fields", "gradient_split_elementary", "polya_szego_axial",
               "sweep_average", "hardy_type_axial", "polya_szego_cap")


class ConfigError(ValueError):
    pass


def _strict(d: dict, allowed, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be a JSON object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class ChecksConfig:
    enabled: list = dc_field(default_factory=lambda: list(CHECK_NAMES))
    tolerances: dict = dc_field(default_factory=dict)
    trials: int = 16
    seed: int = 0
    levels: list = dc_field(default_factory=lambda: [0.1, 0.25, 0.5, 0.75])
    inequalities: bool = True


@dataclass
class CorpusConfig:
    count: int = 100
    seed: int = 0
    smoothness: float = 0.3


@dataclass
class RunConfig:
    """One run: grid, solver settings, checks, corpus and output directory."""

    grid: GridSpec = dc_field(default_factory=lambda: GridSpec(**DEFAULT_GRID))
    solver: SolverConfig = dc_field(default_factory=SolverConfig)
    checks: ChecksConfig = dc_field(default_factory=ChecksConfig)
    corpus: CorpusConfig = dc_field(default_factory=CorpusConfig)
    output_dir: str = "morrey_out"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        _strict(d, ("grid", "solver", "checks", "corpus", "output_dir"), "config")
        grid_d = dict(DEFAULT_GRID, **d.get("grid", {}))
        _strict(grid_d, DEFAULT_GRID, "grid")
        solver_d = d.get("solver", {})
        _strict(solver_d, [f.name for f in dc_fields(SolverConfig)], "solver")
        if "pin_values" in solver_d:
            solver_d = dict(solver_d, pin_values=tuple(solver_d["pin_values"]))
        checks_d = d.get("checks", {})
        _strict(checks_d, [f.name for f in dc_fields(ChecksConfig)], "checks")
        unknown = set(checks_d.get("enabled", [])) - set(CHECK_NAMES)
        if unknown:
            raise ConfigError(f"unknown checks: {sorted(unknown)}")
        corpus_d = d.get("corpus", {})
        _strict(corpus_d, [f.name for f in dc_fields(CorpusConfig)], "corpus")
        return cls(GridSpec.from_dict(grid_d), SolverConfig(**solver_d), ChecksConfig(**checks_d),
                   CorpusConfig(**corpus_d), str(d.get("output_dir", "morrey_out")))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc})") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"grid": self.grid.to_dict(), "solver": self.solver.to_dict(),
                "checks": asdict(self.checks), "corpus": asdict(self.corpus),
                "output_dir": self.output_dir}

    def verify_config(self) -> VerifyConfig:
        return VerifyConfig(trials=self.checks.trials, rng_seed=self.checks.seed,
                            levels=tuple(self.checks.levels),
                            inequalities=self.checks.inequalities,
                            enabled=tuple(self.checks.enabled),
                            overrides=dict(self.checks.tolerances))


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2) + "\n")


# ------------------------------------------------------------------ commands

def cmd_solve(cfg: RunConfig, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    sol = solve_extremal(cfg.grid, cfg.solver)
    write_field_csv(sol.field, out / "field.csv")
    write_spec_json(cfg.grid, out / "grid.json")
    _dump(dict(sol.summary(), grid=cfg.grid.to_dict(), solver=cfg.solver.to_dict()),
          out / "solution.json")
    print(f"energy={sol.energy:.10g} seminorm={sol.seminorm:.10g} "
          f"C*={sol.sharp_constant:.10g} c={sol.source_strength:.10g} "
          f"iterations={sol.iterations} converged={sol.converged}")
    return 0 if sol.converged else 1


def _load_solution(sol_dir: Path):
    spec = read_spec_json(sol_dir / "grid.json")
    field = read_field_csv(sol_dir / "field.csv", spec)
    meta = json.loads((sol_dir / "solution.json").read_text())
    return solution_from_field(field, converged=bool(meta.get("converged", True)))


def cmd_verify(cfg: RunConfig, sol_dir: Path, out: Path) -> int:
    sol = _load_solution(sol_dir)
    report = run_full_report(sol, cfg.verify_config())
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / "report.json")
    for c in report.checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: violation {c.max_violation:.3e} (tol {c.tolerance:.3e})")
        for w in c.witnesses:
            print(f"     witness {w}")
    for r in report.inequalities:
        status = "PASS" if r.passed else "FAIL"
        print(f"{status} {r.name}: lhs {r.lhs:.6g} rhs {r.rhs:.6g} deficit {r.deficit:.3e} "
              f"(tol {r.tolerance:.3e})")
    return 0 if report.passed else 1


SYM_OPS = ("axial_average", "axial_sweep", "positive_part", "odd_extension", "cap_rearrange")


def cmd_symmetrize(field_path: Path, grid_path: Path, op: str, zeta, out: Path) -> int:
    spec = read_spec_json(grid_path)
    field = read_field_csv(field_path, spec)
    out.mkdir(parents=True, exist_ok=True)
    if op == "cap_rearrange":
        pf = to_polar(field, default_polar_spec(spec))
        write_polar_csv(cap_rearrange(pf), out / "cap_rearranged.csv")
        return 0
    if op == "axial_average":
        res = axial_average(field)
    elif op == "axial_sweep":
        if zeta is None:
            raise ConfigError("axial_sweep needs --zeta")
        res = axial_sweep(field, zeta)
    elif op == "positive_part":
        res = positive_part(field)
    else:
        res = odd_extension(field)
    write_field_csv(res, out / f"{op}.csv")
    write_spec_json(spec, out / "grid.json")
    return 0


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    """Seeded random corpora through every inequality checker on the config grid."""
    grid = cfg.grid
    cc = cfg.corpus
    out.mkdir(parents=True, exist_ok=True)
    pspec = default_polar_spec(grid)
    calib = {
        "polya_szego_axial": calibrate_eps_disc("polya_szego_axial", grid, seed=cc.seed,
                                                smoothness=cc.smoothness).eps_disc,
        "sweep_average": calibrate_eps_disc("sweep_average", grid, seed=cc.seed,
                                            smoothness=cc.smoothness).eps_disc,
        "polya_szego_cap": calibrate_eps_disc("polya_szego_cap", (pspec, grid.p), seed=cc.seed,
                                              smoothness=cc.smoothness).eps_disc,
    }
    summary = {}
    rng = np.random.default_rng(cc.seed)
    a = rng.normal(size=(10_000, grid.n))
    b = rng.normal(size=(10_000, grid.n))
    pw = clarkson_pointwise(a, b, grid.p)
    summary["clarkson_pointwise"] = {"count": 10_000, "min_deficit": pw.deficit,
                                     "failures": int(not pw.passed)}
    all_ok = pw.passed
    for kind in SWEEP_KINDS:
        target = (pspec, grid.p) if kind == "polya_szego_cap" else grid
        res = corpus_sweep(kind, target, cc.count, seed=cc.seed + 1, smoothness=cc.smoothness,
                           eps_disc=calib.get(kind))
        fails = sum(not r.passed for r in res)
        all_ok &= fails == 0
        entry = {"count": len(res), "failures": fails,
                 "min_deficit": min(r.deficit for r in res),
                 "tolerance": res[0].tolerance}
        if kind == "hardy_type_axial":
            entry["max_ratio"] = max(r.lhs for r in res)
        summary[kind] = entry
        print(f"{'PASS' if fails == 0 else 'FAIL'} {kind}: {len(res)} fields, "
              f"min deficit {entry['min_deficit']:.3e}, failures {fails}")
    _dump({"grid": grid.to_dict(), "corpus": asdict(cc), "eps_disc": calib,
           "results": summary, "passed": bool(all_ok)}, out / "sweep.json")
    return 0 if all_ok else 1


def cmd_figures(sol_dir: Path, out: Path, heights=None) -> int:
    """Horizontal-slice profiles ``u(y, a)`` and per-sphere angular profiles."""
    sol = _load_solution(sol_dir)
    field = sol.field
    spec = field.spec
    out.mkdir(parents=True, exist_ok=True)
    heights = heights or [0.25, 0.5, 1.0, 1.5, 2.0]
    c = spec.center
    with open(out / "slices.csv", "w") as fh:
        fh.write("a,y,value\n")
        for a in heights:
            j = spec.index_of([0.0] * (spec.n - 1) + [a])[-1]
            line = field.values[(slice(None),) + (c,) * (spec.n - 2) + (j,)]
            for y, v in zip(spec.axis, line):
                fh.write(f"{a!r},{float(y)!r},{float(v)!r}\n")
    pspec = PolarSpec.default(spec.n, min(spec.L / 2, 2.0), spec.h)
    pf = to_polar(field, pspec)
    with open(out / "spheres.csv", "w") as fh:
        fh.write("t,theta,value\n")
        if spec.n == 2:
            keep = pspec.psi >= 0
            for i, t in enumerate(pspec.radii):
                for th, v in zip(pspec.theta[keep], pf.values[i][keep]):
                    fh.write(f"{float(t)!r},{float(th)!r},{float(v)!r}\n")
        else:
            for i, t in enumerate(pspec.radii):
                for th, v in zip(pspec.theta, pf.values[i, :, 0]):
                    fh.write(f"{float(t)!r},{float(th)!r},{float(v)!r}\n")
    return 0


# ---------------------------------------------------------------------- main

EPILOG = f"""\
config file (JSON, unknown keys rejected; every section optional):
  grid:    n, L, h, p                       default {DEFAULT_GRID}
  solver:  max_iters (200000), grad_tol (1e-8, relative to the two-spike
           start), step_rule (ncg | adaptive-two-point | fixed),
           init (two-spike | zero | random), seed (0), pin_values ([1, -1]),
           fixed_step (null)
  checks:  enabled (all of {', '.join(CHECK_NAMES)}),
           tolerances ({{check name or tol_sym / tol_mono: value}}),
           trials (16), seed (0), levels ([0.1, 0.25, 0.5, 0.75]),
           inequalities (true)
  corpus:  count (100), seed (0), smoothness (0.3)
  output_dir: "morrey_out"

environment: MORREY_THREADS caps numba threads; MORREY_NUMBA=0 selects the
pure numpy kernels.
exit codes: 0 pass, 1 check failure or non-converged solve, 2 usage/IO error.
"""


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="morrey", description=__doc__.splitlines()[0],
                                     epilog=EPILOG,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="RunConfig JSON file")
        p.add_argument("--out", type=Path, help="output directory (overrides output_dir)")

    p = sub.add_parser("solve", help="compute the normalised extremal")
    common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=float)
    p.add_argument("--L", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--tol", type=float, help="relative gradient tolerance")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--init", choices=("two-spike", "zero", "random"))
    p.add_argument("--seed", type=int)

    p = sub.add_parser("verify", help="run every check on a solution directory")
    common(p)
    p.add_argument("--solution", type=Path, help="directory written by `solve` "
                   "(default: the output directory)")

    p = sub.add_parser("symmetrize", help="apply one operator to a field CSV")
    common(p)
    p.add_argument("--field", type=Path, required=True)
    p.add_argument("--grid", type=Path, help="grid JSON (default: grid.json next to the field)")
    p.add_argument("--operator", choices=SYM_OPS, required=True)
    p.add_argument("--zeta", type=float, nargs="+")

    p = sub.add_parser("sweep", help="randomised inequality corpora")
    common(p)

    p = sub.add_parser("figures", help="slice and sphere profiles as CSV")
    common(p)
    p.add_argument("--solution", type=Path)
    return parser


def _merge_cli(cfg: RunConfig, args) -> RunConfig:
    grid = cfg.grid.to_dict()
    for key in ("n", "p", "L", "h"):
        val = getattr(args, key, None)
        if val is not None:
            grid[key] = val
    solver = cfg.solver.to_dict()
    for key, name in (("tol", "grad_tol"), ("max_iters", "max_iters"), ("init", "init"),
                      ("seed", "seed")):
        val = getattr(args, key, None)
        if val is not None:
            solver[name] = val
    d = cfg.to_dict()
    d["grid"], d["solver"] = grid, solver
    return RunConfig.from_dict(d)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.command == "solve":
            cfg = _merge_cli(cfg, args)
        out = args.out or Path(cfg.output_dir)
        if args.command == "solve":
            return cmd_solve(cfg, out)
        if args.command == "verify":
            return cmd_verify(cfg, args.solution or out, out)
        if args.command == "symmetrize":
            grid = args.grid or args.field.parent / "grid.json"
            return cmd_symmetrize(args.field, grid, args.operator, args.zeta, out)
        if args.command == "sweep":
            return cmd_sweep(cfg, out)
        return cmd_figures(args.solution or out, out)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        print(f"morrey: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
