"""Command line entry point.

Exit status: 0 pass, 1 verification failure, 2 usage or format error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any

from .automaton import MODES, MaxRoundsExceeded
from .compiler import (
    CircuitParseError,
    MeasurementProgram,
    ProgramFormatError,
    compile_circuit,
    observables_report,
    parse_circuit,
    pattern_resources,
    resource_report,
)
from .harness import (
    PROGRAM_TOL,
    enumerate_branches,
    enumerate_program,
    load_input,
    random_states,
    run_program_once,
    run_shots,
    verify_program,
)
from .patterns import MeasurementPattern, PatternError, cnot_pattern, generalized_transfer_pattern
from .patterns import teleport_pattern, transfer_pattern
from .statevec import GATES, StateError, make_basis_state

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _dump(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False)


def builtin_pattern(name: str) -> MeasurementPattern:
    """``transfer``, ``cnot``, ``teleport`` or ``step:U,V`` (e.g. ``step:T,H``)."""
    if name == "transfer":
        return transfer_pattern(0, 1)
    if name == "cnot":
        return cnot_pattern(0, 1, 2)
    if name == "teleport":
        return teleport_pattern(0, 1, 2)
    if name.startswith("step:"):
        u, _, v = name[5:].partition(",")
        if u not in GATES or v not in GATES:
            raise UsageError(f"unknown gate in {name!r}")
        return generalized_transfer_pattern(GATES[u], GATES[v], 0, 1)
    raise UsageError(f"unknown builtin pattern {name!r}")


def _load_program(path: str) -> MeasurementProgram:
    return MeasurementProgram.from_json(Path(path).read_text())


def cmd_compile(args: argparse.Namespace) -> int:
    ir = parse_circuit(Path(args.circuit).read_text())
    text = compile_circuit(ir, args.family).to_json()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args: argparse.Namespace) -> int:
    program = _load_program(args.program)
    state = load_input(args.input, program.num_logical)
    if args.shots > 1:
        stats = run_shots(program, state, args.shots, args.seed, args.mode, args.max_rounds)
        print(_dump(stats.to_dict()))
        if stats.fidelities is not None and min(stats.fidelities) < 1 - PROGRAM_TOL:
            return EXIT_FAIL
        return EXIT_OK
    _, records = run_program_once(program, state, args.seed, args.mode, args.max_rounds)
    for rec in records:
        print(_dump(rec))
    fid = records[-1].get("fidelity")
    return EXIT_FAIL if fid is not None and fid < 1 - PROGRAM_TOL else EXIT_OK


def cmd_enumerate(args: argparse.Namespace) -> int:
    if Path(args.target).is_file():
        program = _load_program(args.target)
        state = load_input(args.input or "0" * program.num_logical, program.num_logical)
        ir = program.circuit()
        from .compiler import direct_simulate
        from .statevec import fidelity_mod_phase

        want = direct_simulate(ir, state) if ir is not None else None
        ok = True
        for outcomes, prob, out in enumerate_program(program, state, args.limit):
            rec: dict[str, Any] = {"outcomes": outcomes, "probability": prob}
            if want is not None:
                rec["fidelity"] = fidelity_mod_phase(out, want)
                ok &= rec["fidelity"] >= 1 - PROGRAM_TOL
            print(_dump(rec))
        return EXIT_OK if ok else EXIT_FAIL
    pattern = builtin_pattern(args.target)
    k = len(pattern.input_qubits)
    state = load_input(args.input, k) if args.input else make_basis_state(k, "0" * k)
    records = enumerate_branches(pattern, state)
    for r in records:
        print(_dump(r.to_dict()))
    return EXIT_OK if all(r.fidelity_vs_prediction >= 1 - 1e-9 for r in records) else EXIT_FAIL


def cmd_verify(args: argparse.Namespace) -> int:
    program = _load_program(args.program)
    ir = parse_circuit(Path(args.circuit).read_text())
    if ir.num_logical != program.num_logical:
        raise UsageError("circuit and program disagree on the number of qubits")
    inputs = random_states(ir.num_logical, args.inputs, args.seed)
    mode = "tracked" if args.enumerate else args.mode
    report = verify_program(
        program,
        ir,
        inputs,
        mode=mode,
        seed=args.seed,
        enumerate_all=args.enumerate,
        shots=args.shots,
        tol=args.tol,
        max_rounds=args.max_rounds,
    )
    out = report.to_dict()
    out["circuit_matches_program"] = program.metadata.get("source_sha256") == ir.sha256()
    print(_dump(out))
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_report(args: argparse.Namespace) -> int:
    if Path(args.program).is_file():
        program = _load_program(args.program)
        print(_dump({"observables": observables_report(program), "resources": resource_report(program)}))
    else:
        pattern = builtin_pattern(args.program)
        print(_dump({"pattern": args.program, "resources": pattern_resources(pattern)}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="statetransfer",
        description="Compile circuits to measurement-only programs and simulate them.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="lower a .qc circuit to a program file")
    p.add_argument("circuit")
    p.add_argument("--family", choices=["O1", "O2"], default="O1")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compile)

    def execution_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-rounds", type=int, default=1000)

    p = sub.add_parser("run", help="execute a program and print a JSON-lines trace")
    p.add_argument("program")
    p.add_argument("--input", required=True, help="bitstring or amplitude file")
    p.add_argument("--mode", choices=MODES, default="faithful")
    p.add_argument("--shots", type=int, default=1)
    execution_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("enumerate", help="list every measurement branch")
    p.add_argument("target", help="program file or builtin: transfer, cnot, teleport, step:U,V")
    p.add_argument("--input")
    p.add_argument("--limit", type=int, default=4096)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("verify", help="check a program against direct simulation")
    p.add_argument("program")
    p.add_argument("--circuit", required=True)
    p.add_argument("--enumerate", action="store_true", help="check every tracked-mode branch")
    p.add_argument("--shots", type=int, default=1)
    p.add_argument("--mode", choices=MODES, default="faithful")
    p.add_argument("--inputs", type=int, default=4, help="number of random input states")
    p.add_argument("--tol", type=float, default=PROGRAM_TOL)
    execution_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("report", help="observable census and resource counts")
    p.add_argument("program", help="program file or builtin pattern name")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except MaxRoundsExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (
        UsageError,
        CircuitParseError,
        ProgramFormatError,
        PatternError,
        StateError,
        OSError,
        ValueError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
