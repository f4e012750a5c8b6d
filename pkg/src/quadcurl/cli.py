"""Command-line entry points.

    quadcurl mesh-info     --mesh-n 4 | --mesh-file cube.msh
    quadcurl check-element [--trials 1000 --seed 42]
    quadcurl solve         --mesh-n 4 --alpha 1 --beta 1 --gamma 1 --out-dir out
    quadcurl convergence   --levels 2,4,8 --out-dir out

Settings may also come from a key=value file given with --config; flags on
the command line win. Exit codes: 0 success, 1 failed check or solve,
2 configuration error.
"""
import argparse
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import checks
from .assembly import LOAD_DEGREE, ModelParams, assemble, assemble_blocks, export_matrix_market
from .mesh import MeshError, build_topology, generate_box_mesh, mesh_stats
from .mms import (MMS, broken_norms, convergence_study, divergence_test, face_jump_report,
                  level_label, zero_forcing)
from .msh import MshError, read_msh
from .solver import DEFAULT_TOL, SolverError, default_maxit, solve_cg
from .space import FESpace

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("mesh-info", "check-element", "solve", "convergence")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    mesh_n: int = None
    mesh_file: str = None
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0
    tol: float = DEFAULT_TOL
    maxit: int = None
    levels: list = field(default_factory=lambda: [2, 4, 8])
    seed: int = checks.DEFAULT_SEED
    trials: int = checks.DEFAULT_TRIALS
    out_dir: str = None
    mms: str = "sincube"
    zero_forcing: bool = False
    load_degree: int = LOAD_DEGREE
    load_refine: int = 0
    export_matrix: str = None
    timing: bool = True
    inject_sign_flip: int = None

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}")
        try:
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.mesh_n is not None and self.mesh_n < 1:
            raise ConfigError("--mesh-n must be at least 1")
        if self.mesh_n is not None and self.mesh_file is not None:
            raise ConfigError("give either --mesh-n or --mesh-file, not both")
        if not self.levels or any(n < 1 for n in self.levels):
            raise ConfigError("--levels must be positive integers")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise ConfigError("--levels must be strictly ascending")
        if not (self.tol > 0):
            raise ConfigError("--tol must be positive")
        if self.maxit is not None and self.maxit < 1:
            raise ConfigError("--maxit must be at least 1")
        if self.trials < 1:
            raise ConfigError("--trials must be at least 1")
        if self.mms not in MMS:
            raise ConfigError(f"unknown manufactured solution {self.mms!r}")
        if self.load_refine < 0:
            raise ConfigError("--load-refine must be non-negative")
        if self.inject_sign_flip is not None and not 0 <= self.inject_sign_flip < 20:
            raise ConfigError("sign flip index must be in 0..19")
        return self

    def params(self):
        return ModelParams(self.alpha, self.beta, self.gamma)


def _int_list(text):
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _bool(text):
    v = str(text).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# (dest, type) of keys accepted in config files
_CONFIG_KEYS = {
    "mesh_n": int, "mesh_file": str, "alpha": float, "beta": float, "gamma": float,
    "tol": float, "maxit": int, "levels": _int_list, "seed": int, "trials": int,
    "out_dir": str, "mms": str, "zero_forcing": _bool, "load_degree": int,
    "load_refine": int, "export_matrix": str, "timing": _bool,
}


def read_config_file(path):
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _CONFIG_KEYS[key](value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="quadcurl", description="20-DOF quad-curl element toolkit")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="key=value settings file; command-line flags win")
    p.add_argument("--mesh-n", type=int, help="generated unit-cube mesh with n^3 subcubes")
    p.add_argument("--mesh-file", help="Gmsh 2.2 ASCII mesh")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--levels", type=_int_list, help="e.g. 2,4,8")
    p.add_argument("--tol", type=float, help="relative CG residual")
    p.add_argument("--maxit", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, help="random tets for check-element")
    p.add_argument("--out-dir")
    p.add_argument("--mms", choices=sorted(MMS))
    p.add_argument("--zero-forcing", action="store_const", const=True,
                   help="solve with f = 0 while measuring against the exact solution")
    p.add_argument("--load-degree", type=int, help="tet rule degree for the load")
    p.add_argument("--load-refine", type=int, help="red-refinement levels for the load rule")
    p.add_argument("--export-matrix", help="write the reduced matrix in Matrix Market format")
    p.add_argument("--no-timing", dest="timing", action="store_const", const=False,
                   help="leave timing columns empty so output is byte-reproducible")
    p.add_argument("--inject-sign-flip", type=int, help=argparse.SUPPRESS)
    return p


def parse_config(argv):
    args = build_parser().parse_args(argv)
    values = read_config_file(args.config) if args.config else {}
    for key, val in vars(args).items():
        if key not in ("command", "config") and val is not None:
            values[key] = val
    return RunConfig(args.command, **values).validate()


# ---------------------------------------------------------------- commands

def _emit(cfg, name, payload):
    text = json.dumps(payload, indent=2, sort_keys=True, default=_json_default)
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text + "\n")
    return text


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def load_mesh(cfg):
    if cfg.mesh_file:
        return read_msh(cfg.mesh_file)
    return generate_box_mesh(cfg.mesh_n if cfg.mesh_n is not None else 2)


def cmd_mesh_info(cfg):
    mesh = load_mesh(cfg)
    topo = build_topology(mesh)
    stats = mesh_stats(mesh, topo)
    info = {**asdict(stats), "n_boundary_faces": int(topo.boundary_faces.sum()),
            "n_boundary_edges": int(topo.boundary_edges.sum()), "reoriented": mesh.reoriented}
    print(_emit(cfg, "mesh_info.json", info))
    return EXIT_OK


def cmd_check_element(cfg):
    results = checks.run_element_checks(cfg.trials, cfg.seed, flip=cfg.inject_sign_flip)
    for r in results:
        print(r.line())
    cond = results[0].info
    print(f"Vandermonde condition: min {cond['cond_min']:.3e} median {cond['cond_median']:.3e} "
          f"max {cond['cond_max']:.3e} over {cond['trials']} tets")
    _emit(cfg, "check_element.json", {"trials": cfg.trials, "seed": cfg.seed,
                                      "checks": [r.as_dict() for r in results]})
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed: " + ", ".join(failed), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _exact(cfg):
    exact = MMS[cfg.mms](cfg.params())
    return zero_forcing(exact) if cfg.zero_forcing else exact


def run_solve(cfg):
    """Assemble and solve on the configured mesh. Returns (space, x, report dict)."""
    space = FESpace.from_mesh(load_mesh(cfg))
    exact = _exact(cfg)
    blocks = assemble_blocks(space)
    system = assemble(space, exact.params, exact.f, cfg.load_degree, blocks, cfg.load_refine)
    if cfg.export_matrix:
        export_matrix_market(system, cfg.export_matrix)
    report = {"mesh": {"label": level_label(space), "n_tets": space.mesh.n_tets,
                       "h": space.stats().h_max, "n_dofs": space.n_dofs, "ndof_free": space.n_free},
              "params": asdict(exact.params), "mms": exact.description,
              "load": {"degree": cfg.load_degree, "refine": cfg.load_refine}}
    maxit = cfg.maxit if cfg.maxit is not None else default_maxit(system.size)
    try:
        x_free, sol = solve_cg(system, tol=cfg.tol, maxit=maxit)
    except SolverError as exc:
        report["solver"] = asdict(exc.report) if exc.report else None
        report["error"] = str(exc)
        return space, None, report
    x = system.expand(x_free)
    report["solver"] = asdict(sol)
    if not cfg.timing:
        report["solver"]["seconds"] = None
    report["errors"] = broken_norms(x, exact, space).as_dict()
    report["exact_norms"] = broken_norms(np.zeros(space.n_dofs), exact, space).as_dict()
    div = divergence_test(x, space, blocks["mass"])
    report["divergence"] = {"max_normalized": div.max_normalized, "n_tests": div.n_tests}
    jump = face_jump_report(x, space)
    report["face_jumps"] = {"max_jump": jump.max_jump, "relative": jump.relative}
    return space, x, report


def cmd_solve(cfg):
    space, x, report = run_solve(cfg)
    _emit(cfg, "report.json", report)
    if x is None:
        print(json.dumps(report, indent=2, default=_json_default))
        print(report["error"], file=sys.stderr)
        return EXIT_FAIL
    _emit(cfg, "solution.json", {str(i): float(v) for i, v in enumerate(x)})
    e = report["errors"]
    print(f"ndof_free {space.n_free}  cg_iters {report['solver']['iterations']}  "
          f"err_L2 {e['l2']:.6e}  err_curl {e['curl']:.6e}  err_gradcurl {e['gradcurl']:.6e}  "
          f"err_total {e['total']:.6e}")
    return EXIT_OK


def cmd_convergence(cfg):
    table = convergence_study(cfg.levels, _exact(cfg), cfg.tol, cfg.maxit)
    csv = table.to_csv(timing=cfg.timing)
    data = table.as_dict()
    if not cfg.timing:
        for lev in data["levels"]:
            lev["seconds"] = None
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "convergence.csv").write_text(csv)
    _emit(cfg, "convergence.json", data)
    print(csv, end="")
    if table.failed:
        print(f"level failed: {table.error}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


HANDLERS = {"mesh-info": cmd_mesh_info, "check-element": cmd_check_element,
            "solve": cmd_solve, "convergence": cmd_convergence}


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"quadcurl: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"quadcurl: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # argparse
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return HANDLERS[cfg.command](cfg)
    except (MshError, MeshError, OSError) as exc:
        print(f"quadcurl: {exc}", file=sys.stderr)
        return EXIT_CONFIG
