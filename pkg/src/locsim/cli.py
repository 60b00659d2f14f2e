"""Command-line entry point: ``locsim {run,protocol,sweep,contaminate,oracle-check}``.

Exit codes: 0 success, 1 oracle-check mismatch, 2 usage/parse/validation
error, 3 runtime error. JSON output is key-sorted and contains no timing, so
identical invocations produce identical bytes.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import dsl, protocol
from .errors import DomainError, LocError
from .fock import PureState, normalize, serialize
from .measurement import BellKind, Semantics, check_theta
from .oracle import max_deviation, oracle_state, output_configs
from .elements import apply_elements

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3
CSV_COLUMNS = ("theta", "kind", "basis", "p1", "p2", "success", "fidelity")


class UsageError(Exception):
    pass


def workers() -> int:
    try:
        return max(1, int(os.environ.get("LOC_THREADS", "1")))
    except ValueError:
        return 1


def _angle(value: float, degrees: bool) -> float:
    return math.radians(value) if degrees else value


def _theta(value: float, degrees: bool) -> float:
    theta = _angle(value, degrees)
    try:
        return check_theta(theta)
    except DomainError as exc:
        raise UsageError(str(exc)) from exc


def dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _pattern_records(outcomes) -> list[dict]:
    recs = []
    for o in outcomes:
        rec = {"pattern": str(o.pattern), "probability": o.probability}
        if o.fidelity is not None:
            rec["fidelity"] = o.fidelity
        recs.append(rec)
    return recs


def _override_theta(ir: dsl.CircuitIR, theta: float) -> dsl.CircuitIR:
    sources = tuple(s if s.is_vacuum else dataclasses.replace(s, theta=theta) for s in ir.sources)
    return dataclasses.replace(ir, sources=sources)


def cmd_run(args) -> int:
    text = Path(args.circuit).read_text(encoding="utf-8")
    ir = dsl.parse(text, path=args.circuit)
    if args.theta is not None:
        ir = _override_theta(ir, _theta(args.theta, args.degrees))
    started = time.perf_counter()
    result = protocol.execute(ir, args.semantics)
    report = {
        "schema_version": SCHEMA_VERSION,
        "command": "run",
        "circuit_sha256": hashlib.sha256(text.encode()).hexdigest(),
        "semantics": args.semantics,
        "theta_override": None if args.theta is None else _theta(args.theta, args.degrees),
        "amplitudes": serialize(result.final_state),
        "patterns": _pattern_records(result.outcomes),
        "success_probability": result.success_probability,
    }
    if result.heralded_fidelity is not None:
        report["fidelity"] = result.heralded_fidelity
    _emit(dumps(report), args.output)
    _write_timing(args, started)
    return EXIT_OK


def _write_timing(args, started: float) -> None:
    if getattr(args, "timing_file", None):
        Path(args.timing_file).write_text(dumps({"elapsed_s": time.perf_counter() - started}), encoding="utf-8")


def cmd_protocol(args) -> int:
    config = protocol.ProtocolConfig(BellKind.parse(args.input), _theta(args.theta, args.degrees),
                                     args.basis, args.semantics)
    started = time.perf_counter()
    payload = {"schema_version": SCHEMA_VERSION, "command": "protocol", **protocol.run(config).to_dict()}
    _emit(dumps(payload), args.output)
    _write_timing(args, started)
    return EXIT_OK


def sweep_rows(results) -> list[dict]:
    rows = []
    for r in results:
        rows.append({
            "theta": r.config.theta,
            "kind": r.config.input_kind.value,
            "basis": r.config.measurement_basis.value,
            "p1": r.probabilities[0],
            "p2": r.probabilities[1],
            "success": r.success_probability,
            "fidelity": r.heralded_fidelity,
        })
    return rows


def cmd_sweep(args) -> int:
    if args.steps < 2:
        raise UsageError("--steps must be at least 2")
    start, end = _theta(args.theta_start, args.degrees), _theta(args.theta_end, args.degrees)
    if end < start:
        raise UsageError("--theta-end must not be below --theta-start")
    thetas = protocol.theta_grid(start, end, args.steps)
    started = time.perf_counter()
    results = protocol.sweep(BellKind.parse(args.input), thetas, args.basis, args.semantics, workers())
    rows = sweep_rows(results)
    if args.out == "json":
        rows = [{k: v for k, v in row.items() if v is not None} for row in rows]
        text = dumps({"schema_version": SCHEMA_VERSION, "command": "sweep", "rows": rows})
    else:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(["" if row[c] is None else (repr(row[c]) if isinstance(row[c], float) else row[c])
                             for c in CSV_COLUMNS])
        text = buf.getvalue()
    _emit(text, args.output)
    _write_timing(args, started)
    return EXIT_OK


def cmd_contaminate(args) -> int:
    weights = (args.w_nominal, args.w_double_a, args.w_double_b)
    if min(weights) < 0 or abs(sum(weights) - 1) > 1e-9:
        raise UsageError(f"branch weights {weights} must be nonnegative and sum to 1")
    total = sum(weights)
    weights = tuple(w / total for w in weights)
    scenario = protocol.ContaminationScenario(_theta(args.theta, args.degrees), *weights,
                                              input_kind=BellKind.parse(args.input),
                                              semantics=Semantics(args.semantics))
    started = time.perf_counter()
    payload = {"schema_version": SCHEMA_VERSION, "command": "contaminate",
               **protocol.contamination_run(scenario).to_dict()}
    _emit(dumps(payload), args.output)
    _write_timing(args, started)
    return EXIT_OK


def random_input(ir: dsl.CircuitIR, rng: np.random.Generator, max_photons: int = 4) -> PureState:
    """A random superposition of up to three configurations on the circuit's input ports."""
    primal = tuple(sorted(m for m in ir.modes if m.spatial in set(ir.primal_spatials())))
    n = int(rng.integers(1, max_photons + 1))
    pool = output_configs(primal, n)
    picks = rng.choice(len(pool), size=min(len(pool), int(rng.integers(1, 4))), replace=False)
    terms = {pool[i]: complex(*rng.normal(size=2)) for i in picks}
    return normalize(PureState.from_terms(terms, ir.modes))


def cmd_oracle_check(args) -> int:
    if args.tolerance < 1e-12:
        raise UsageError("--tolerance must be at least 1e-12")
    if args.cases < 0:
        raise UsageError("--cases must be nonnegative")
    ir = dsl.parse_file(args.circuit)
    rng = np.random.default_rng(args.seed)
    states = [protocol.initial_state(ir)] + [random_input(ir, rng) for _ in range(args.cases)]
    deviations = [max_deviation(apply_elements(s, ir.elements), oracle_state(s, ir)) for s in states]
    worst = max(deviations)
    passed = worst <= args.tolerance
    _emit(dumps({
        "schema_version": SCHEMA_VERSION,
        "command": "oracle-check",
        "cases": len(states),
        "failures": sum(d > args.tolerance for d in deviations),
        "max_deviation": worst,
        "tolerance": args.tolerance,
        "passed": passed,
    }), args.output)
    return EXIT_OK if passed else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="locsim", description="Linear-optical Fock-state simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--degrees", action="store_true", help="angles are given in degrees")
        p.add_argument("--semantics", choices=[s.value for s in Semantics], default="strict")
        p.add_argument("-o", "--output", help="write to this file instead of stdout")
        p.add_argument("--timing-file", help="write elapsed time to this sidecar JSON file")

    p = sub.add_parser("run", help="execute a .loc circuit")
    p.add_argument("circuit")
    p.add_argument("--theta", type=float, help="override theta of every source")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("protocol", help="run the concentration scheme for one configuration")
    p.add_argument("--input", default="phi+")
    p.add_argument("--theta", type=float, default=math.pi / 4)
    p.add_argument("--basis", choices=["HV", "DA", "RL"], default="HV")
    common(p)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("sweep", help="sweep theta")
    p.add_argument("--input", default="phi+")
    p.add_argument("--basis", choices=["HV", "DA", "RL"], default="HV")
    p.add_argument("--theta-start", type=float, default=0.0)
    p.add_argument("--theta-end", type=float, default=math.pi / 2)
    p.add_argument("--steps", type=int, default=65)
    p.add_argument("--out", choices=["csv", "json"], default="csv")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("contaminate", help="mix in double-pair emission")
    p.add_argument("--theta", type=float, default=math.pi / 4)
    p.add_argument("--w-nominal", type=float, required=True)
    p.add_argument("--w-double-a", type=float, required=True)
    p.add_argument("--w-double-b", type=float, required=True)
    p.add_argument("--input", default="phi+")
    common(p)
    p.set_defaults(func=cmd_contaminate)

    p = sub.add_parser("oracle-check", help="compare the engine against permanents")
    p.add_argument("--circuit", required=True)
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if getattr(args, "input", None) is not None:
            BellKind.parse(args.input)
        return args.func(args)
    except dsl.DslError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, DomainError) as exc:
        print(f"locsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"locsim {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LocError as exc:
        print(f"locsim {args.command}: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
