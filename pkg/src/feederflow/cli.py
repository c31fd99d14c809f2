"""Batch command-line front door.

Five subcommands cover the pipeline: ``parse`` (feeder file to data-model
JSON), ``pf`` (native power-flow solve), ``opf`` (linear dispatch via the
embedded simplex), ``export`` (write a formulation as math-model JSON), and
``compare`` (voltage-magnitude deltas between two solution files).

stdout carries only the primary artifact of each command; diagnostics go to
stderr, and ``--json`` adds a machine-readable run report there. Exit codes
are stable: 0 success, 2 input/parse error, 3 solve failure or infeasible,
4 unsupported formulation or topology, 5 comparison above tolerance.

A config file of ``key = value`` lines (``#`` comments allowed) can preset
any long flag; explicit command-line flags win over the file.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time

from .dss import DssParseError, DssValueError, model_to_json_dict, parse_file
from .formulations import (
    FormulationError,
    build_opf_acr,
    build_opf_lindistflow,
    build_opf_socbfm,
    build_pf_ivr,
)
from .lp import LpError, LpOptions, solve_lp
from .mathir import model_to_json_dict as mathmodel_to_json_dict
from .network import NetworkConversionError, from_dss
from .network.components import TimeSeries
from .pf import BfsOptions, NewtonOptions, delta_by_bus, solve_bfs, solve_newton

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_SOLVE = 3
EXIT_UNSUPPORTED = 4
EXIT_COMPARE = 5

_INPUT_ERRORS = (DssParseError, DssValueError, NetworkConversionError, OSError)


class _Report:
    """Run report accumulated across stages, emitted to stderr on exit."""

    def __init__(self, argv: list[str], enabled: bool):
        self.enabled = enabled
        self.data: dict = {
            "command": argv,
            "inputs": {},
            "timings_ms": {},
            "result": {},
            "warnings": [],
        }
        self._t0 = time.perf_counter()
        self._stage_start = self._t0

    def add_input(self, path: str) -> None:
        try:
            with open(path, "rb") as f:
                digest = hashlib.sha256(f.read()).hexdigest()
        except OSError:
            digest = None
        self.data["inputs"][path] = digest

    def stage(self, name: str) -> None:
        now = time.perf_counter()
        self.data["timings_ms"][name] = round((now - self._stage_start) * 1e3, 3)
        self._stage_start = now

    def warn(self, message: str) -> None:
        self.data["warnings"].append(message)
        print(f"warning: {message}", file=sys.stderr)

    def result(self, **kv) -> None:
        self.data["result"].update(kv)

    def emit(self, exit_code: int) -> None:
        if not self.enabled:
            return
        self.data["timings_ms"]["total"] = round((time.perf_counter() - self._t0) * 1e3, 3)
        self.data["exit_code"] = exit_code
        json.dump(self.data, sys.stderr, sort_keys=True, default=str)
        sys.stderr.write("\n")


def _read_config(path: str) -> dict[str, str]:
    """key = value lines; blank lines and # comments ignored."""
    out: dict[str, str] = {}
    with open(path) as f:
        for ln, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value, got {raw.strip()!r}")
            key, _, val = line.partition("=")
            out[key.strip().lower().replace("-", "_")] = val.strip().strip("\"'")
    return out


def _resolve(args: argparse.Namespace, config: dict[str, str], spec: dict[str, tuple]) -> None:
    """Fill None-valued flags from the config file, then from hard defaults.

    ``spec`` maps dest name to (converter, default). Command-line values are
    parsed with default None so a config key only applies when the flag was
    not given explicitly.
    """
    for dest, (conv, default) in spec.items():
        if getattr(args, dest, None) is not None:
            continue
        if dest in config:
            raw = config[dest]
            if conv is bool:
                setattr(args, dest, raw.lower() in ("1", "true", "yes", "on"))
            else:
                setattr(args, dest, conv(raw))
        else:
            setattr(args, dest, default)


def _write_artifact(text: str, out_path: str | None) -> None:
    if out_path:
        with open(out_path, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _load_network(args, report: _Report):
    report.add_input(args.file)
    model = parse_file(args.file)
    report.stage("parse")
    net = from_dss(model, sbase=args.sbase)
    report.stage("network")
    return net


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=1, sort_keys=True) + "\n"


# -- subcommands -----------------------------------------------------------


def cmd_parse(args, config, report: _Report) -> int:
    _resolve(args, config, {"to": (str, "json"), "out": (str, ""), "sbase": (float, 1.0e6)})
    if args.to != "json":
        print(f"error: unsupported output format {args.to!r}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    report.add_input(args.file)
    model = parse_file(args.file)
    report.stage("parse")
    payload = model_to_json_dict(model)
    report.result(object_counts=model.class_counts())
    _write_artifact(_json_text(payload), args.out or None)
    report.stage("write")
    return EXIT_OK


def cmd_pf(args, config, report: _Report) -> int:
    _resolve(
        args,
        config,
        {
            "tol": (float, 1e-10),
            "max_iter": (int, 50),
            "method": (str, "newton"),
            "out": (str, ""),
            "sbase": (float, 1.0e6),
        },
    )
    if args.method not in ("newton", "bfs"):
        print(f"error: unknown method {args.method!r}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    net = _load_network(args, report)
    if args.method == "newton":
        sol = solve_newton(net, NewtonOptions(tolerance=args.tol, max_iterations=args.max_iter))
    else:
        sol = solve_bfs(net, BfsOptions(tolerance=args.tol, max_iterations=args.max_iter))
    report.stage("solve")
    report.result(
        converged=sol.converged,
        iterations=sol.iterations,
        max_residual=sol.max_residual,
        method=sol.method,
    )
    _write_artifact(_json_text(sol.to_json_dict(net)), args.out or None)
    report.stage("write")
    if not sol.converged:
        print(
            f"error: power flow did not converge in {sol.iterations} iterations "
            f"(max residual {sol.max_residual:.3e})",
            file=sys.stderr,
        )
        return EXIT_SOLVE
    return EXIT_OK


def _load_periods(path: str) -> TimeSeries:
    with open(path) as f:
        data = json.load(f)
    ts = TimeSeries(
        dt_hours=float(data["dt_hours"]),
        load_scale=[float(x) for x in data["load_scale"]],
        gen_scale=[float(x) for x in data.get("gen_scale", [1.0] * len(data["load_scale"]))],
        cost_scale=[float(x) for x in data.get("cost_scale", [1.0] * len(data["load_scale"]))],
    )
    ts.validate_lengths()
    return ts


def cmd_opf(args, config, report: _Report) -> int:
    _resolve(
        args,
        config,
        {
            "form": (str, "lindistflow"),
            "periods": (str, ""),
            "out": (str, ""),
            "sbase": (float, 1.0e6),
        },
    )
    if args.form != "lindistflow":
        print(
            f"error: unsupported dispatch formulation {args.form!r}; the native "
            f"solver handles lindistflow only",
            file=sys.stderr,
        )
        return EXIT_UNSUPPORTED
    net = _load_network(args, report)
    periods = None
    if args.periods:
        report.add_input(args.periods)
        periods = _load_periods(args.periods)
    from .formulations.lindistflow import complementarity_violation, storage_trajectories

    model = build_opf_lindistflow(net, periods=periods)
    report.stage("build")
    res = solve_lp(model, LpOptions())
    report.stage("solve")
    report.result(status=res.status, iterations=res.iterations)

    if res.status == "optimal":
        traj = storage_trajectories(net, res.assignment, periods)
        comp = complementarity_violation(net, res.assignment, periods)
        payload = {
            "schema": "feederflow.dispatch.v1",
            "status": res.status,
            "objective": res.objective,
            "dual_objective": res.dual_objective,
            "iterations": res.iterations,
            "storage": traj,
            "complementarity_violation": comp,
            "assignment": {k: res.assignment[k] for k in sorted(res.assignment)},
        }
        report.result(objective=res.objective, complementarity_violation=comp)
        _write_artifact(_json_text(payload), args.out or None)
        report.stage("write")
        return EXIT_OK

    payload = {
        "schema": "feederflow.dispatch.v1",
        "status": res.status,
        "iterations": res.iterations,
        "message": res.message,
    }
    if res.status == "infeasible" and res.farkas is not None:
        top = sorted(res.farkas.items(), key=lambda kv: -abs(kv[1]))[:10]
        payload["farkas_gap"] = res.farkas_gap
        payload["farkas_top_rows"] = [{"row": k, "multiplier": v} for k, v in top]
        print(
            f"error: dispatch infeasible; certificate gap {res.farkas_gap:.3e}, "
            f"dominant rows: {', '.join(k for k, _ in top[:3])}",
            file=sys.stderr,
        )
    else:
        print(f"error: dispatch solve ended with status {res.status!r}", file=sys.stderr)
    _write_artifact(_json_text(payload), args.out or None)
    report.stage("write")
    return EXIT_SOLVE


_BUILDERS = {
    "ivr": build_pf_ivr,
    "acr": build_opf_acr,
    "socbfm": build_opf_socbfm,
    "lindistflow": build_opf_lindistflow,
}


def cmd_export(args, config, report: _Report) -> int:
    _resolve(args, config, {"form": (str, ""), "out": (str, ""), "sbase": (float, 1.0e6)})
    if args.form not in _BUILDERS:
        known = ", ".join(sorted(_BUILDERS))
        print(f"error: unknown formulation {args.form!r} (expected one of {known})", file=sys.stderr)
        return EXIT_UNSUPPORTED
    net = _load_network(args, report)
    model = _BUILDERS[args.form](net)
    report.stage("build")
    counts: dict[str, int] = {}
    for con in model.constraints:
        kind = type(con).__name__
        counts[kind] = counts.get(kind, 0) + 1
    report.result(variables=len(model.variables), constraints=counts)
    print(
        f"{args.form}: {len(model.variables)} variables, "
        + ", ".join(f"{v} {k}" for k, v in sorted(counts.items())),
        file=sys.stderr,
    )
    _write_artifact(_json_text(mathmodel_to_json_dict(model)), args.out or None)
    report.stage("write")
    return EXIT_OK


def cmd_compare(args, config, report: _Report) -> int:
    _resolve(args, config, {"floating": (str, ""), "tol": (float, 1e-6), "out": (str, "")})
    report.add_input(args.sol_a)
    report.add_input(args.sol_b)
    from .pf.solution import load_solution_voltages

    with open(args.sol_a) as f:
        va = load_solution_voltages(json.load(f))
    with open(args.sol_b) as f:
        vb = load_solution_voltages(json.load(f))
    report.stage("load")
    floating = frozenset(b for b in args.floating.split(",") if b)
    try:
        per_bus = delta_by_bus(va, vb, floating)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    delta = max(per_bus.values(), default=0.0)
    worst = sorted(per_bus.items(), key=lambda kv: -kv[1])[:5]
    report.stage("compare")
    report.result(delta=delta, tol=args.tol)
    lines = [f"delta {delta:.6e} (tol {args.tol:.6e})"]
    for bus, d in worst:
        lines.append(f"  {bus}: {d:.6e}")
    _write_artifact("\n".join(lines) + "\n", args.out or None)
    return EXIT_OK if delta <= args.tol else EXIT_COMPARE


# -- argument plumbing -------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json", action="store_true", help="emit a run report to stderr as JSON")
    p.add_argument("--config", help="key = value file presetting any long flag")
    p.add_argument("--seed", type=int, default=0, help="seed for any randomized internals")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="feederflow",
        description="Parse, solve, export and compare unbalanced distribution feeder cases.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("parse", help="parse a feeder file and write the data model as JSON")
    p.add_argument("file")
    p.add_argument("--to", help="output format (json)")
    p.add_argument("--out", help="write the artifact to this path instead of stdout")
    p.add_argument("--sbase", type=float, help="per-unit power base in VA (default 1e6)")
    _add_common(p)
    p.set_defaults(func=cmd_parse)

    p = sub.add_parser("pf", help="solve power flow and write the solution as JSON")
    p.add_argument("file")
    p.add_argument("--tol", type=float, help="convergence tolerance (default 1e-10)")
    p.add_argument("--max-iter", type=int, dest="max_iter", help="iteration cap (default 50)")
    p.add_argument("--method", choices=["newton", "bfs"], help="solver (default newton)")
    p.add_argument("--out", help="write the artifact to this path instead of stdout")
    p.add_argument("--sbase", type=float, help="per-unit power base in VA (default 1e6)")
    _add_common(p)
    p.set_defaults(func=cmd_pf)

    p = sub.add_parser("opf", help="solve a linear dispatch problem")
    p.add_argument("file")
    p.add_argument("--form", help="dispatch formulation (lindistflow)")
    p.add_argument("--periods", help="JSON time series file for multi-period dispatch")
    p.add_argument("--out", help="write the artifact to this path instead of stdout")
    p.add_argument("--sbase", type=float, help="per-unit power base in VA (default 1e6)")
    _add_common(p)
    p.set_defaults(func=cmd_opf)

    p = sub.add_parser("export", help="write a formulation as math-model JSON")
    p.add_argument("file")
    p.add_argument("--form", help="one of ivr, acr, socbfm, lindistflow")
    p.add_argument("--out", help="write the artifact to this path instead of stdout")
    p.add_argument("--sbase", type=float, help="per-unit power base in VA (default 1e6)")
    _add_common(p)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("compare", help="compare two solution files by voltage magnitude")
    p.add_argument("sol_a")
    p.add_argument("sol_b")
    p.add_argument("--floating", help="comma-separated buses compared by phase-to-phase magnitude")
    p.add_argument("--tol", type=float, help="acceptance threshold on delta (default 1e-6)")
    p.add_argument("--out", help="write the report to this path instead of stdout")
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    report = _Report(argv, enabled=args.json)
    config: dict[str, str] = {}
    code = EXIT_OK
    try:
        if args.config:
            config = _read_config(args.config)
        code = args.func(args, config, report)
    except FormulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_UNSUPPORTED
    except LpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_UNSUPPORTED
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_PARSE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_PARSE
    report.result(exit_code=code)
    report.emit(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
