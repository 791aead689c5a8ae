"""Command-line front end.

Every subcommand prints (or writes with ``-o``) one JSON report holding a
``manifest`` and a ``result``.  Nothing is written until the run succeeds,
so bad input never leaves a partial report behind.

Exit codes: 0 success, 2 input error, 3 infeasible model, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from ._parallel import resolve_threads
from .empirics import DataError, read_csv
from .idset import closed_form_bounds, evaluate_closed_form, identified_set, testable_implications
from .inference import InferenceError, TestConfig, confidence_region, specification_test, test
from .linsys import build_A
from .lp.polyhedra import PolyhedronError, format_hrep
from .model import ModelError
from .modelfile import ModelFileError, load_model, parse_param_flag

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4
BUNDLED = {"model": "example_model.json", "data": "example_counts.csv"}


class InputError(Exception):
    pass


class Infeasible(Exception):
    def __init__(self, report: dict, message: str):
        super().__init__(message)
        self.report = report


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("strata_bounds") / "data" / name))


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def _inputs(args) -> dict[str, Path]:
    paths = {}
    for key in ("model", "data"):
        if getattr(args, key, None) is None and getattr(args, "bundled", False):
            setattr(args, key, str(bundled_path(BUNDLED[key])))
        v = getattr(args, key, None)
        if v is not None:
            paths[key] = Path(v)
    return paths


def _load(args, need_param: bool = True):
    paths = _inputs(args)
    if "model" not in paths:
        raise InputError("--model is required (or pass --bundled)")
    model, param, _ = load_model(paths["model"])
    if getattr(args, "param", None):
        param = parse_param_flag(model, args.param, getattr(args, "stratum", None))
    elif getattr(args, "stratum", None) and param is not None:
        param = parse_param_flag(model, param.name, args.stratum)
    if need_param and param is None:
        raise InputError("no parameter: give --param or a 'parameter' entry in the model file")
    data = None
    if "data" in paths:
        data = read_csv(paths["data"])
        if data.support.n_cells != model.support.n_cells or any(
                tuple(map(str, a)) != tuple(map(str, b)) for a, b in zip(
                    (data.support.y_values, data.support.d_values, data.support.z_values),
                    (model.support.y_values, model.support.d_values, model.support.z_values))):
            # read again against the model's labels so unobserved labels still get cells
            data = read_csv(paths["data"], model.support)
    return model, param, data, paths


def _config(args) -> TestConfig:
    grid = None
    if getattr(args, "grid", None):
        try:
            lo, hi, k = args.grid.split(":")
            grid = (float(lo), float(hi), int(k))
        except ValueError:
            raise InputError(f"--grid {args.grid!r}: expected LO:HI:N") from None
    lam = args.lambda_n
    return TestConfig(alpha=args.alpha, bootstrap_B=args.bootstrap, lambda_n=lam if lam == "auto" else float(lam),
                      seed=args.seed, theta_grid=grid, threads=args.threads,
                      restricted_method=args.restricted_method, keep_draws=args.keep_draws)


# subcommands --------------------------------------------------------------

def cmd_bounds(args) -> tuple[dict, int]:
    model, param, data, _ = _load(args)
    if data is None:
        raise InputError("--data is required")
    system = build_A(model, param, 0.0)
    res = identified_set(model, param, data, grid_n=args.pi_grid, threads=args.threads, system=system)
    out = {"parameter": {"name": param.name, "conditioning": sorted(r.label() for r in param.conditioning)},
           "bounds": res.to_dict(system.column_labels())}
    if args.closed_form:
        if res.nonempty and res.method == "identified_mass":
            forms = closed_form_bounds(system)
            out["closed_form"] = {
                "lower_max_of": [e.text for e in forms["lower"]],
                "upper_min_of": [e.text for e in forms["upper"]],
                "mass_max_of": [e.text for e in forms["mass_lower"]],
                "mass_min_of": [e.text for e in forms["mass_upper"]],
                "note": "bounds = envelope / stratum mass",
                "evaluated": evaluate_closed_form(forms, data),
            }
        else:
            out["closed_form"] = None
            out["closed_form_note"] = "closed forms are emitted only when the stratum mass is point identified"
    if res.status == "empty_model" and not args.allow_infeasible:
        raise Infeasible(out, f"model is inconsistent with the data; violated: {res.certificate}")
    return out, EXIT_OK


def cmd_test(args) -> tuple[dict, int]:
    model, param, data, _ = _load(args)
    if data is None:
        raise InputError("--data is required")
    return {"test": test(args.theta0, model, param, data, _config(args)).to_dict()}, EXIT_OK


def cmd_ci(args) -> tuple[dict, int]:
    model, param, data, _ = _load(args)
    if data is None:
        raise InputError("--data is required")
    return {"region": confidence_region(model, param, data, _config(args)).to_dict()}, EXIT_OK


def cmd_spec_test(args) -> tuple[dict, int]:
    model, _, data, _ = _load(args, need_param=False)
    if data is None:
        raise InputError("--data is required")
    return {"spec_test": specification_test(model, data, _config(args)).to_dict()}, EXIT_OK


def cmd_implications(args) -> tuple[dict, int]:
    model, _, _, _ = _load(args, need_param=False)
    imp = testable_implications(model, max_dim=args.max_dim)
    text = format_hrep(imp.hrep, imp.names)
    lines = text.splitlines()
    n_eq = len(imp.hrep.exact_E)
    out = {
        "equalities": lines[:n_eq],
        "inequalities": [{"text": t, "trivial": bool(tr)} for t, tr in zip(lines[n_eq:], imp.trivial)],
        "n_nontrivial": imp.nontrivial,
        "hrep_file": args.out,
    }
    return out, EXIT_OK, ({args.out: text} if args.out else {})


def cmd_replicate(args) -> tuple[dict, int]:
    from .replication import emit_figure_data, figure_csv, replicate_example, example_distribution

    out = replicate_example(grid_n=args.pi_grid, threads=args.threads)
    files = {}
    if args.figure:
        files[args.figure] = figure_csv(emit_figure_data(example_distribution(), grid_n=args.figure_points))
        out["figure"] = args.figure
    return out, (EXIT_OK if out["all_pass"] else EXIT_NUMERICAL), files


# parser -------------------------------------------------------------------

def _common(p: argparse.ArgumentParser, data: bool = True, param: bool = True):
    p.add_argument("--model", help="model JSON file")
    if data:
        p.add_argument("--data", help="CSV with header y,d,z or y,d,z,count")
    p.add_argument("--bundled", action="store_true", help="use the bundled three-valued example files")
    if param:
        p.add_argument("--param", help="parameter, e.g. ate_contrast:1,0 or stratum_mass")
        p.add_argument("--stratum", help="conditioning treatment types, e.g. 012 or 010+012")


def _run_opts(p: argparse.ArgumentParser):
    p.add_argument("-o", "--output", help="write the JSON report here instead of stdout")
    p.add_argument("--threads", type=int, default=None, help="worker cap (env STRATA_BOUNDS_THREADS)")
    p.add_argument("--reproducible", action="store_true",
                   help="leave timing and thread count out of the manifest")


def _inference_opts(p: argparse.ArgumentParser, grid: bool = False):
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bootstrap", type=int, default=200, metavar="B")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", dest="lambda_n", default="auto")
    p.add_argument("--restricted-method", choices=["lp", "cutting_plane"], default="lp")
    p.add_argument("--keep-draws", action="store_true")
    if grid:
        p.add_argument("--grid", help="theta grid LO:HI:N (default: around the plug-in bounds)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="strata-bounds", description="Sharp bounds and tests for principal strata.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="sharp identified set at the observed distribution")
    _common(p)
    _run_opts(p)
    p.add_argument("--pi-grid", type=int, default=1001, help="grid size over the stratum mass")
    p.add_argument("--closed-form", action="store_true")
    p.add_argument("--allow-infeasible", action="store_true")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("test", help="bootstrap test of theta = theta0")
    _common(p)
    _run_opts(p)
    p.add_argument("--theta0", type=float, required=True)
    _inference_opts(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("ci", help="confidence region by test inversion")
    _common(p)
    _run_opts(p)
    _inference_opts(p, grid=True)
    p.set_defaults(func=cmd_ci)

    p = sub.add_parser("spec-test", help="test that the model can rationalize the data")
    _common(p, param=False)
    _run_opts(p)
    _inference_opts(p)
    p.set_defaults(func=cmd_spec_test)

    p = sub.add_parser("implications", help="sharp testable implications as an H-representation")
    _common(p, data=False, param=False)
    _run_opts(p)
    p.add_argument("--out", help="write the inequalities (one per line) to this file")
    p.add_argument("--max-dim", type=int, default=40)
    p.set_defaults(func=cmd_implications)

    p = sub.add_parser("replicate", aliases=["replicate-appendix-c"], help="rerun the bundled worked example")
    _run_opts(p)
    p.add_argument("--pi-grid", type=int, default=2001)
    p.add_argument("--figure", help="write plot-ready CSV of the bound curves here")
    p.add_argument("--figure-points", type=int, default=101)
    p.set_defaults(func=cmd_replicate)
    return ap


def _manifest(args, paths: dict, started: float, start_iso: str) -> dict:
    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "output", "reproducible")}
    if args.reproducible:
        config.pop("threads", None)
    m = {
        "tool": "strata-bounds",
        "version": __version__,
        "command": args.command,
        "config": config,
        "inputs": {k: {"path": str(v), "sha256": _digest(v)} for k, v in sorted(paths.items())},
        "seed": getattr(args, "seed", None),
    }
    if not args.reproducible:
        m["threads"] = resolve_threads(args.threads)
        m["started"] = start_iso
        m["wall_clock_seconds"] = time.perf_counter() - started
    return m


def _emit(report: dict, args, files: dict):
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    for path, content in files.items():
        Path(path).write_text(content)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    start_iso = datetime.now(timezone.utc).isoformat(timespec="seconds")
    code, files = EXIT_OK, {}
    try:
        ret = args.func(args)
        result, code = ret[0], ret[1]
        files = ret[2] if len(ret) > 2 else {}
    except Infeasible as exc:
        result, code = exc.report, EXIT_INFEASIBLE
        print(f"strata-bounds: {exc}", file=sys.stderr)
    except (InputError, ModelFileError, DataError, ModelError, InferenceError, OSError) as exc:
        print(f"strata-bounds: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (PolyhedronError, np.linalg.LinAlgError, ArithmeticError, RuntimeError) as exc:
        print(f"strata-bounds: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    paths = _inputs(args)
    report = {"manifest": _manifest(args, paths, started, start_iso), "result": result}
    _emit(report, args, files)
    return code


if __name__ == "__main__":
    sys.exit(main())
