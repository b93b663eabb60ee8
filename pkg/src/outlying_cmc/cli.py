"""
Batch front end.

Usage:
    outlying-cmc verify identities --tol 1e-8
    outlying-cmc scan-f --metric zero --r-min 1.2 --r-max 50 --samples 200 --out f.csv
    outlying-cmc counterexample --k 200 --s0 2 --out prof.json
    outlying-cmc cmc find --metric prof.json --xi0 0,0,2 --lambda 1000
    outlying-cmc report --input find.json --format csv

Every subcommand also takes ``--config FILE``: a JSON object whose keys are
flag names (``n-polar`` or ``n_polar``).  Flags given on the command line win.

Exit codes: 0 success, 1 verification failure, 2 usage error, 3 solver or
I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .cmc.metric import MetricSpec
from .errors import (
    BoundaryError,
    ConstructionFailure,
    DomainError,
    InconsistencyError,
    InvalidArgumentError,
    OutlyingCMCError,
    SolverFailure,
)
from .functional import SCAN_COLUMNS, FunctionalContext, scan_row
from .tensors import ZeroTensor, tensor_from_spec

__all__ = ["run", "main", "emit_report", "RunConfig", "ConfigError"]

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3

# flag name -> (type, default); None means "command specific"
OPTIONS = {
    "metric": (str, "zero"),
    "k": (int, 200),
    "s0": (float, 2.0),
    "amplitude": (float, None),
    "xi0": (str, None),
    "lambda": (float, 1000.0),
    "degree": (int, 8),
    "n-polar": (int, None),
    "tol": (float, None),
    "seed": (int, 0),
    "out": (str, None),
    "format": (str, None),
    "r-min": (float, 1.2),
    "r-max": (float, 50.0),
    "samples": (int, 200),
    "input": (str, None),
}
POSITIVE = ("tol", "lambda", "s0", "amplitude", "r-min", "r-max")


class ConfigError(Exception):
    """Bad configuration or flags (exit code 2)."""


class RunConfig(dict):
    """Resolved options: defaults, then config file, then explicit flags."""

    def __getattr__(self, name):
        try:
            return self[name.replace("_", "-")]
        except KeyError:
            raise AttributeError(name) from None


def _position(text, offset):
    line = text.count("\n", 0, offset) + 1
    col = offset - (text.rfind("\n", 0, offset) + 1) + 1
    return line, col


def load_json(path, what="config"):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {what} {path}: {exc.strerror}") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def read_config(path):
    doc, text = load_json(path)
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}:1:1: config must be a JSON object")
    out = {}
    for key, value in doc.items():
        name = key.replace("_", "-")
        if name not in OPTIONS:
            at = text.find(json.dumps(key))
            line, col = _position(text, max(at, 0))
            raise ConfigError(f"{path}:{line}:{col}: unknown key {key!r}")
        kind = OPTIONS[name][0]
        try:
            if kind is int and (isinstance(value, bool) or int(value) != value):
                raise ValueError
            out[name] = kind(value) if not (name == "xi0" and isinstance(value, list)) else \
                ",".join(repr(float(v)) for v in value)
        except (TypeError, ValueError):
            at = text.find(json.dumps(key))
            line, col = _position(text, max(at, 0))
            raise ConfigError(f"{path}:{line}:{col}: bad value for {key!r}") from None
    return out


def resolve(args):
    cfg = RunConfig({name: default for name, (_, default) in OPTIONS.items()})
    if args.config:
        cfg.update(read_config(args.config))
    for name in OPTIONS:
        value = getattr(args, name.replace("-", "_"), None)
        if value is not None:
            cfg[name] = value
    for name in POSITIVE:
        if cfg[name] is not None and not cfg[name] > 0:
            raise ConfigError(f"--{name} must be positive")
    if cfg["format"] not in (None, "csv", "json"):
        raise ConfigError("--format must be csv or json")
    return cfg


def parse_vector(text, name="xi0"):
    try:
        v = np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise ConfigError(f"--{name} expects x,y,z") from None
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ConfigError(f"--{name} expects three finite numbers x,y,z")
    return v


def load_metric(source):
    if source in ("zero", "schwarzschild"):
        return MetricSpec(ZeroTensor())
    if source.lstrip().startswith("{"):
        try:
            doc = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--metric:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    else:
        doc, _ = load_json(source, "metric")
    try:
        return MetricSpec(tensor_from_spec(doc))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid metric {source}: {exc}") from None


# ------------------------------------------------------------------ output


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _flatten(row, prefix=""):
    out = {}
    for key, value in row.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(_flatten(value, name + "."))
        elif isinstance(value, (list, tuple, np.ndarray)):
            for i, v in enumerate(value):
                out[f"{name}_{i}"] = v
        else:
            out[name] = value
    return out


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # repr round-trips; non-finite values become null to stay valid JSON
        return x if math.isfinite(x) else None
    return obj


def emit_report(results, fmt, columns=None):
    """Serialize a report (dict) or a table (list of dicts) to bytes.

    JSON keys are sorted; CSV has a fixed header (``columns`` or the keys of
    the first row, with lists expanded to ``name_0, name_1, ...``) and floats
    written with 17 significant digits.
    """
    if fmt == "json":
        return (json.dumps(_plain(results), sort_keys=True, indent=2) + "\n").encode()
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    rows = [results] if isinstance(results, dict) else list(results)
    flat = [_flatten(r) for r in rows]
    header = list(columns) if columns is not None else (list(flat[0]) if flat else [])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in flat:
        w.writerow([_cell(r.get(c, "")) for c in header])
    return buf.getvalue().encode()


def write_output(data, path):
    if path is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    with open(path, "wb") as fh:
        fh.write(data)


def _note(msg):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------- commands


def cmd_verify(cfg, args):
    from . import verification as V

    suite = args.suite
    kwargs = {}
    if cfg.tol is not None and suite in ("identities", "flux"):
        kwargs["tol"] = cfg.tol
    if suite == "identities":
        kwargs["seed"] = cfg.seed
    if cfg.n_polar is not None and suite in ("identities", "cmc-scaling"):
        kwargs["n_polar"] = cfg.n_polar
    result = V.SUITES[suite](**kwargs)
    for c in result.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {suite} {c.name} "
              f"value={c.value:.6g} threshold={c.threshold:.6g}")
    if cfg.out is not None:
        write_output(emit_report(result.rows(), cfg.format or "csv", V.CHECK_COLUMNS), cfg.out)
    return EXIT_OK if result.passed else EXIT_VERIFY


def cmd_scan(cfg, args):
    from .quadrature import build_sphere_grid
    from .verification import ordered_map

    if not cfg.r_max > cfg.r_min > 1.0:
        raise ConfigError("need 1 < --r-min < --r-max")
    if cfg.samples < 0:
        raise ConfigError("--samples must be non-negative")
    direction = parse_vector(cfg.xi0 or "0,0,1")
    if not np.linalg.norm(direction) > 0:
        raise ConfigError("--xi0 direction must be nonzero")
    direction = direction / np.linalg.norm(direction)
    metric = load_metric(cfg.metric)
    grid = build_sphere_grid(cfg.n_polar or 32, azimuthal_count=1024
                             if getattr(metric.tensor, "t_breakpoints", ()) else None)
    ctx = FunctionalContext(metric.tensor, grid)
    radii = np.geomspace(cfg.r_min, cfg.r_max, cfg.samples) if cfg.samples else []
    rows = ordered_map(lambda r: scan_row(ctx, r * direction), radii)
    write_output(emit_report(rows, cfg.format or "csv", SCAN_COLUMNS), cfg.out)
    return EXIT_OK


def cmd_counterexample(cfg, args):
    from .counterexample import BumpParams, construct, export_profile

    p = BumpParams(cfg.k, cfg.s0)
    if cfg.amplitude is not None:
        c = construct(p, amplitude_start=cfg.amplitude, amplitude_cap=cfg.amplitude)
    else:
        c = construct(p)
    cp = c.critical_point
    _note(f"k={c.params.k} a_k={c.params.a_k:.17g} amplitude={c.params.amplitude:g} "
          f"minimum at {np.array2string(cp.xi, precision=10)} "
          f"eigenvalues {np.array2string(cp.hessian_eigenvalues, precision=6)}")
    doc = export_profile(c.params)
    write_output(emit_report(doc, "json"), cfg.out)
    return EXIT_OK


def _solver_args(cfg):
    xi = parse_vector(cfg.xi0 or "0,0,2")
    if cfg.degree < 4:
        raise ConfigError("--degree must be at least 4")
    return xi, dict(degree=cfg.degree, n_polar=cfg.n_polar or 24)


def cmd_cmc(cfg, args):
    from .cmc.solver import LyapunovSchmidtSolver, find_cmc

    metric = load_metric(cfg.metric)
    xi, kw = _solver_args(cfg)
    solver_kw = dict(kw)
    if cfg.tol is not None:
        solver_kw["tol"] = cfg.tol
    solver = LyapunovSchmidtSolver(metric, cfg["lambda"], **solver_kw)
    if args.action == "solve":
        _, report = solver.solve(xi)
        out = report.to_dict()
    else:
        res = find_cmc(metric, xi, cfg["lambda"], solver=solver, **kw)
        cp = res.critical_point
        out = res.report.to_dict()
        out.update({
            "xi0": [float(v) for v in xi],
            "classification": cp.classification,
            "gradient_norm": float(cp.gradient_norm),
            "hessian_eigenvalues": [float(v) for v in cp.hessian_eigenvalues],
            "start_h": [float(v) for v in res.start_report.h],
            "multiplier_ratio": float(res.multiplier_ratio),
            "calibration": float(res.calibration),
        })
    write_output(emit_report(out, cfg.format or "json"), cfg.out)
    return EXIT_OK


def cmd_report(cfg, args):
    if cfg.input is None:
        raise ConfigError("report needs --input FILE")
    doc, _ = load_json(cfg.input, "input")
    if not isinstance(doc, (dict, list)):
        raise ConfigError(f"{cfg.input}:1:1: expected an object or a list of objects")
    write_output(emit_report(doc, cfg.format or "csv"), cfg.out)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_options(p):
    p.add_argument("--config", help="JSON file of option values")
    p.add_argument("--metric", help="metric JSON file, inline JSON, or 'zero'")
    p.add_argument("--k", type=int)
    p.add_argument("--s0", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--xi0", help="x,y,z")
    p.add_argument("--lambda", dest="lambda", type=float)
    p.add_argument("--degree", type=int)
    p.add_argument("--n-polar", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--r-min", type=float)
    p.add_argument("--r-max", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--input")


def build_parser():
    parser = argparse.ArgumentParser(prog="outlying-cmc",
                                     description="Reduced area functional and large CMC spheres")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=("identities", "flux", "positivity", "cmc-scaling"))
    _add_options(p)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("scan-f", help="tabulate F along a ray")
    _add_options(p)
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("counterexample", help="build and export the counterexample profile")
    _add_options(p)
    p.set_defaults(handler=cmd_counterexample)

    p = sub.add_parser("cmc", help="solve for, or search for, a large CMC sphere")
    p.add_argument("action", choices=("solve", "find"))
    _add_options(p)
    p.set_defaults(handler=cmd_cmc)

    p = sub.add_parser("report", help="re-emit a JSON report as csv or json")
    _add_options(p)
    p.set_defaults(handler=cmd_report)
    return parser


def run(argv=None):
    """Execute one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = resolve(args)
        return args.handler(cfg, args)
    except ConfigError as exc:
        _note(f"error: {exc}")
        return EXIT_USAGE
    except InconsistencyError as exc:
        _note(f"verification failure: {exc}")
        return EXIT_VERIFY
    except (SolverFailure, BoundaryError, ConstructionFailure) as exc:
        _note(f"solver failure: {type(exc).__name__}: {exc}")
        return EXIT_SOLVER
    except (InvalidArgumentError, DomainError) as exc:
        _note(f"error: {type(exc).__name__}: {exc}")
        return EXIT_USAGE
    except OutlyingCMCError as exc:
        _note(f"solver failure: {type(exc).__name__}: {exc}")
        return EXIT_SOLVER
    except OSError as exc:
        _note(f"I/O failure: {exc}")
        return EXIT_SOLVER


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
