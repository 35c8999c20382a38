"""Command line front end for the experiment runner.

Subcommands cover the three solver families, the built-in examples, mesh
inspection, and a quick self test. Options may also come from a JSON
config file with the same key names (underscores for dashes); explicit
command line values win over config values.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy.sparse.linalg as spla

from .coefficients import Coefficient
from .harness import (
    run_bielastic,
    run_example,
    run_source,
    run_tep,
    self_test,
)
from .mesh import DOMAINS, dump_mesh, generate_domain

CONFIG_KEYS = {
    "solve-source": {"domain", "level", "levels", "element", "alpha", "beta",
                     "lam", "mu", "f1", "f2", "out", "format"},
    "solve-bielastic": {"domain", "level", "levels", "element", "alpha",
                        "beta", "lam", "mu", "k", "out", "format"},
    "solve-tep": {"domain", "level", "levels", "element", "alpha", "lam",
                  "mu", "rho0", "rho1", "k", "method", "tau_range", "out",
                  "format"},
    "run-example": {"levels", "level", "element", "alpha", "method", "k",
                    "tau_range", "out", "format"},
    "dump-mesh": {"domain", "level", "out"},
    "self-test": set(),
}


def parse_levels(text):
    """Levels given as a range "1-3" or a comma list "1,2,4"."""
    text = str(text).strip()
    if "-" in text:
        lo, hi = text.split("-", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(","))


def parse_tau_range(text):
    lo, hi = str(text).split(":", 1)
    return float(lo), float(hi)


def parse_coefficient(text):
    """A plain number becomes a constant, anything else an expression in
    x1 and x2."""
    try:
        return Coefficient.constant(float(text))
    except (TypeError, ValueError):
        return Coefficient.expression(str(text))


def _add_output_flags(parser):
    parser.add_argument("--out", help="output file (.csv/.json) or directory")
    parser.add_argument("--format", choices=("csv", "json"),
                        help="stdout serialization when --out is absent")
    parser.add_argument("--config", help="JSON config file with option keys")


def _add_level_flags(parser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--level", type=int, help="single refinement level")
    group.add_argument("--levels", help='level set, "1-3" or "1,2,4"')
    parser.add_argument("--big", action="store_true",
                        help="allow level 5 (long runtime)")


def _add_problem_flags(parser, beta=False, densities=False):
    parser.add_argument("--domain", choices=DOMAINS, help="mesh domain")
    parser.add_argument("--element", choices=("b3", "morley"))
    parser.add_argument("--alpha", type=float,
                        help="stabilization weight (morley only)")
    parser.add_argument("--lam", type=float, help="first Lame parameter")
    parser.add_argument("--mu", type=float, help="second Lame parameter")
    if beta:
        parser.add_argument("--beta", help="weight coefficient")
    if densities:
        parser.add_argument("--rho0", help="outer density coefficient")
        parser.add_argument("--rho1", help="inner density coefficient")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bielastic",
        description="fourth-order elastic source, eigenvalue, and "
                    "transmission-eigenvalue experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve-source", help="weighted source problem")
    _add_problem_flags(p, beta=True)
    p.add_argument("--f1", help="first load component expression")
    p.add_argument("--f2", help="second load component expression")
    _add_level_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("solve-bielastic", help="weighted eigenvalue problem")
    _add_problem_flags(p, beta=True)
    p.add_argument("--k", type=int, help="number of eigenvalues")
    _add_level_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("solve-tep", help="transmission eigenvalue problem")
    _add_problem_flags(p, densities=True)
    p.add_argument("--k", type=int, help="number of eigenvalues")
    p.add_argument("--method", choices=("secant", "quadratic"))
    p.add_argument("--tau-range", help="secant scan interval lo:hi")
    _add_level_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("run-example", help="run a built-in example 1-9")
    p.add_argument("number", type=int, help="example number, 1-9")
    p.add_argument("--element", choices=("b3", "morley"))
    p.add_argument("--alpha", type=float)
    p.add_argument("--method", choices=("secant", "quadratic"))
    p.add_argument("--k", type=int)
    p.add_argument("--tau-range", help="secant scan interval lo:hi")
    _add_level_flags(p)
    _add_output_flags(p)

    p = sub.add_parser("dump-mesh", help="write a mesh as plain text")
    p.add_argument("--domain", choices=DOMAINS)
    p.add_argument("--level", type=int, help="refinement level, 1-based")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--config", help="JSON config file with option keys")

    sub.add_parser("self-test", help="verify built-in definitions")
    return parser


def _merge_config(args):
    ns = vars(args)
    path = ns.get("config")
    if not path:
        return ns
    with open(path) as handle:
        config = json.load(handle)
    if not isinstance(config, dict):
        raise ValueError("config must be a JSON object")
    allowed = CONFIG_KEYS[ns["command"]]
    for key, value in config.items():
        key = key.replace("-", "_")
        if key not in allowed:
            raise ValueError(
                f"unknown config key {key!r} for {ns['command']}"
            )
        if ns.get(key) is None:
            ns[key] = value
    return ns


def _levels(ns):
    if ns.get("level") is not None and ns.get("levels") is not None:
        raise ValueError("pass either --level or --levels, not both")
    if ns.get("level") is not None:
        return (int(ns["level"]),)
    if ns.get("levels") is not None:
        return parse_levels(ns["levels"])
    return None


def _require(ns, *keys):
    for key in keys:
        if ns.get(key) is None:
            raise ValueError(f"--{key.replace('_', '-')} is required")


def _emit(report, ns):
    out, fmt = ns.get("out"), ns.get("format")
    if out:
        path = Path(out)
        if path.suffix == ".csv":
            path.write_text(report.to_csv())
        elif path.suffix == ".json":
            path.write_text(report.to_json())
        else:
            path.mkdir(parents=True, exist_ok=True)
            (path / "report.csv").write_text(report.to_csv())
            (path / "report.json").write_text(report.to_json())
            for name, content in report.plot_data().items():
                (path / name).write_text(content)
    if fmt == "csv" and not out:
        sys.stdout.write(report.to_csv())
    elif fmt == "json" and not out:
        sys.stdout.write(report.to_json())
    else:
        print(report.table(), end="")
    return 0


def _dispatch(ns):
    cmd = ns["command"]
    if cmd == "self-test":
        return 0 if self_test(stream=sys.stdout) else 4

    if cmd == "dump-mesh":
        _require(ns, "domain", "level")
        if ns["level"] < 1:
            raise ValueError("levels are 1-based")
        mesh = generate_domain(ns["domain"], int(ns["level"]) - 1)
        if ns.get("out"):
            with open(ns["out"], "w") as handle:
                dump_mesh(mesh, handle)
        else:
            dump_mesh(mesh, sys.stdout)
        return 0

    levels = _levels(ns)
    element = ns.get("element") or "b3"
    if ns.get("alpha") is not None and element != "morley":
        raise ValueError("alpha applies only to the morley element")

    if cmd == "run-example":
        tau_range = (parse_tau_range(ns["tau_range"])
                     if ns.get("tau_range") is not None else None)
        report = run_example(
            ns["number"], levels=levels, element=element,
            alpha=ns.get("alpha"), method=ns.get("method"), k=ns.get("k"),
            tau_range=tau_range, big=bool(ns.get("big")),
        )
        return _emit(report, ns)

    _require(ns, "domain", "lam", "mu")
    if cmd == "solve-source":
        _require(ns, "f1", "f2")
        beta = parse_coefficient(ns.get("beta") if ns.get("beta") is not None
                                 else 1.0)
        f1 = Coefficient.expression(ns["f1"])
        f2 = Coefficient.expression(ns["f2"])
        report = run_source(
            ns["domain"], beta, float(ns["lam"]), float(ns["mu"]), f1, f2,
            exact=None, levels=levels, element=element, alpha=ns.get("alpha"),
            mesh_offset=0, big=bool(ns.get("big")),
        )
        return _emit(report, ns)

    if cmd == "solve-bielastic":
        beta = parse_coefficient(ns.get("beta") if ns.get("beta") is not None
                                 else 1.0)
        report = run_bielastic(
            ns["domain"], beta, float(ns["lam"]), float(ns["mu"]),
            levels=levels, k=int(ns["k"]) if ns.get("k") is not None else 6,
            element=element, alpha=ns.get("alpha"), mesh_offset=0,
            big=bool(ns.get("big")),
        )
        return _emit(report, ns)

    _require(ns, "rho0", "rho1")
    tau_lo, tau_hi = 0.25, None
    if ns.get("tau_range") is not None:
        tau_lo, tau_hi = parse_tau_range(ns["tau_range"])
    report = run_tep(
        ns["domain"], float(ns["lam"]), float(ns["mu"]),
        parse_coefficient(ns["rho0"]), parse_coefficient(ns["rho1"]),
        levels=levels, k=int(ns["k"]) if ns.get("k") is not None else 10,
        element=element, alpha=ns.get("alpha"),
        method=ns.get("method") or "secant", tau_lo=tau_lo, tau_hi=tau_hi,
        mesh_offset=0, big=bool(ns.get("big")),
    )
    return _emit(report, ns)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ns = _merge_config(args)
        return _dispatch(ns)
    except (RuntimeError, np.linalg.LinAlgError, spla.ArpackError) as exc:
        # LinAlgError subclasses ValueError, so solver failures must be
        # matched before the invalid-specification family
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, KeyError, TypeError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
