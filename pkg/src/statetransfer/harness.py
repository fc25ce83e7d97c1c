"""Oracles, branch enumeration, seeded shot runs and verification reports."""

from __future__ import annotations

from collections import Counter
from collections.abc import Sequence
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .automaton import (
    DEFAULT_MAX_ROUNDS,
    MaxRoundsExceeded,
    ProgramRun,
    execute_program,
    logical_output,
)
from .compiler import CircuitIR, MeasurementProgram, direct_simulate
from .observables import ZERO_PROB, Observable, born_probabilities, force_outcome
from .patterns import (
    MeasurementPattern,
    PauliOp,
    apply_pauli,
    detach_expectations,
    initial_aux_state,
    run_pattern,
)
from .statevec import (
    GateMatrix,
    StateError,
    StateVector,
    apply_gate,
    detach_qubits,
    embed,
    fidelity_mod_phase,
    kron,
    make_basis_state,
    make_state,
    permute_qubits,
    random_state,
)

PATTERN_TOL = 1e-9
PROGRAM_TOL = 1e-7

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, index: int) -> int:
    """Per-shot seed: ``splitmix64(splitmix64(seed) ^ index)`` on 64-bit words.

    Part of the trace contract; a shot can be replayed from
    ``(seed, index)`` alone.
    """
    return splitmix64(splitmix64(seed & _MASK64) ^ (index & _MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed & _MASK64))


def random_states(n: int, count: int, seed: int) -> list[StateVector]:
    rng = make_rng(seed)
    return [random_state(n, rng) for _ in range(count)]


def load_input(source: str, n: int) -> StateVector:
    """A bitstring of length ``n`` or a path to an amplitude file.

    Amplitude files hold one ``re im`` pair per line, ``2^n`` lines.
    """
    if len(source) == n and set(source) <= {"0", "1"}:
        return make_basis_state(n, source)
    path = Path(source)
    if not path.is_file():
        raise StateError(f"input {source!r} is neither a {n}-bit string nor a readable file")
    amps = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise StateError(f"{source}:{lineno}: expected 're im'")
        amps.append(complex(float(parts[0]), float(parts[1])))
    if len(amps) != 1 << n:
        raise StateError(f"{source}: expected {1 << n} amplitudes, found {len(amps)}")
    return make_state(amps)


# ------------------------------------------------------------------ enumeration


class _BranchPoint(Exception):
    def __init__(self, probabilities: tuple[float, float]) -> None:
        self.probabilities = probabilities


class _PrefixSource:
    """Forces a known outcome prefix, then stops at the next measurement."""

    def __init__(self, prefix: Sequence[int]) -> None:
        self.prefix = list(prefix)
        self.pos = 0
        self.probability = 1.0

    def measure(self, state: StateVector, obs: Observable) -> tuple[int, StateVector, float]:
        if self.pos < len(self.prefix):
            want = self.prefix[self.pos]
            self.pos += 1
            post, p = force_outcome(state, obs, want)
            self.probability *= p
            return want, post, p
        raise _BranchPoint(born_probabilities(state, obs))


def _enumerate(run, limit: int | None = None) -> list[tuple[list[int], float, Any]]:
    """Depth-first forcing of every outcome vector with nonzero probability.

    ``run(source)`` must execute the whole process against ``source``.
    Returns ``(outcomes, probability, result)`` leaves.
    """
    leaves: list[tuple[list[int], float, Any]] = []
    stack: list[list[int]] = [[]]
    while stack:
        prefix = stack.pop()
        source = _PrefixSource(prefix)
        try:
            result = run(source)
        except _BranchPoint as bp:
            p_plus, p_minus = bp.probabilities
            for r, p in ((-1, p_minus), (1, p_plus)):
                if p > ZERO_PROB:
                    stack.append(prefix + [r])
            continue
        leaves.append((prefix, source.probability, result))
        if limit is not None and len(leaves) > limit:
            raise ValueError(f"more than {limit} branches")
    leaves.sort(key=lambda leaf: [-r for r in leaf[0]])
    return leaves


@dataclass
class BranchRecord:
    outcomes: list[int]
    probability: float
    post_state: StateVector
    predicted_byproduct: PauliOp
    fidelity_vs_prediction: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "outcomes": self.outcomes,
            "probability": self.probability,
            "byproduct": self.predicted_byproduct.label(),
            "fidelity": self.fidelity_vs_prediction,
        }


def pattern_register(pattern: MeasurementPattern, input_state: StateVector) -> StateVector:
    """Input on the pattern's input qubits, fresh auxiliaries per ``aux_init``."""
    n = max(pattern.qubits) + 1
    parts = [(list(pattern.input_qubits), input_state)]
    parts += [([q], initial_aux_state(pattern.aux_init.get(q, "0"))) for q in pattern.auxiliary_qubits]
    return embed(parts, n)


def pattern_output(pattern: MeasurementPattern, run_state: StateVector, outcomes: Sequence[int]) -> StateVector:
    """Detach measured-out qubits and order outputs like the inputs."""
    groups = detach_expectations(pattern, outcomes)
    qubits = [q for qs, _ in groups for q in qs]
    state = detach_qubits(run_state, qubits, kron(*(s for _, s in groups)))
    remaining = [q for q in range(run_state.num_qubits) if q not in qubits]
    if sorted(remaining) != sorted(pattern.output_qubits):
        raise StateError("pattern leaves qubits that are neither outputs nor measured out")
    return permute_qubits(state, [remaining.index(q) for q in pattern.output_qubits])


def enumerate_branches(
    pattern: MeasurementPattern, input_state: StateVector, gate: GateMatrix | None = None
) -> list[BranchRecord]:
    """Every nonzero-probability branch with its fidelity to ``byproduct * gate * input``."""
    gate = gate if gate is not None else pattern.gate_matrix()
    k = len(pattern.input_qubits)
    if input_state.num_qubits != k or gate.arity != k:
        raise StateError("input state and gate must match the pattern's input count")
    ideal = apply_gate(input_state, gate, list(range(k)))
    start = pattern_register(pattern, input_state)
    to_local = {q: i for i, q in enumerate(pattern.output_qubits)}
    records = []
    for outcomes, _, run in _enumerate(lambda src: run_pattern(start, pattern, src)):
        out = pattern_output(pattern, run.state, outcomes)
        corrected = apply_pauli(out, run.byproduct.relocate(to_local))
        records.append(
            BranchRecord(
                outcomes=outcomes,
                probability=run.probability,
                post_state=run.state,
                predicted_byproduct=run.byproduct,
                fidelity_vs_prediction=fidelity_mod_phase(corrected, ideal),
            )
        )
    return records


@dataclass
class PatternReport:
    passed: bool
    states: int
    branches: int
    min_fidelity: float
    probability_sums: list[float]
    failures: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def verify_pattern(
    pattern: MeasurementPattern,
    gate: GateMatrix,
    test_states: Sequence[StateVector],
    tol: float = PATTERN_TOL,
) -> PatternReport:
    failures = []
    sums = []
    branches = 0
    min_fid = 1.0
    for i, s in enumerate(test_states):
        records = enumerate_branches(pattern, s, gate)
        sums.append(sum(r.probability for r in records))
        branches += len(records)
        for r in records:
            min_fid = min(min_fid, r.fidelity_vs_prediction)
            if r.fidelity_vs_prediction < 1 - tol:
                failures.append({"state": i, "outcomes": r.outcomes, "fidelity": r.fidelity_vs_prediction})
    passed = not failures and all(abs(p - 1) <= PATTERN_TOL for p in sums)
    return PatternReport(passed, len(test_states), branches, min_fid, sums, failures)


# --------------------------------------------------------------------- programs


def program_output(run: ProgramRun) -> StateVector:
    return logical_output(run, apply_frame=True)


def enumerate_program(
    program: MeasurementProgram, logical_input: StateVector, limit: int = 4096
) -> list[tuple[list[int], float, StateVector]]:
    """All tracked-mode branches: ``(outcomes, probability, logical output)``."""

    def run(source: _PrefixSource) -> ProgramRun:
        return execute_program(program, logical_input, "tracked", source)

    return [(o, p, program_output(pr)) for o, p, pr in _enumerate(run, limit)]


@dataclass
class ProgramReport:
    passed: bool
    mode: str
    method: str
    inputs: int
    runs: int
    min_fidelity: float
    failures: list[dict[str, Any]] = field(default_factory=list)
    seed: int | None = None

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def verify_program(
    program: MeasurementProgram,
    ir: CircuitIR,
    inputs: Sequence[StateVector],
    mode: str = "faithful",
    seed: int | None = 0,
    enumerate_all: bool = False,
    shots: int = 1,
    tol: float = PROGRAM_TOL,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> ProgramReport:
    """Compare executed programs against :func:`direct_simulate`.

    With ``enumerate_all`` every tracked-mode branch is checked; otherwise
    ``shots`` seeded runs per input are made (shot ``s`` of input ``i``
    uses ``derive_seed(seed, i * shots + s)``).
    """
    if program.num_logical != ir.num_logical:
        raise ValueError("program and circuit disagree on the number of qubits")
    if enumerate_all and mode != "tracked":
        raise ValueError("branch enumeration needs tracked mode; faithful runs are unbounded")
    failures: list[dict[str, Any]] = []
    runs = 0
    min_fid = 1.0
    for i, s in enumerate(inputs):
        want = direct_simulate(ir, s)
        if enumerate_all:
            for outcomes, _, out in enumerate_program(program, s):
                runs += 1
                fid = fidelity_mod_phase(out, want)
                min_fid = min(min_fid, fid)
                if fid < 1 - tol:
                    failures.append({"input": i, "outcomes": outcomes, "fidelity": fid})
            continue
        for shot in range(shots):
            runs += 1
            rng = make_rng(derive_seed(seed or 0, i * shots + shot))
            try:
                pr = execute_program(program, s, mode, rng, max_rounds)
            except MaxRoundsExceeded as exc:
                failures.append({"input": i, "shot": shot, "error": str(exc)})
                min_fid = 0.0
                continue
            fid = fidelity_mod_phase(program_output(pr), want)
            min_fid = min(min_fid, fid)
            if fid < 1 - tol:
                failures.append({"input": i, "shot": shot, "fidelity": fid})
    return ProgramReport(
        passed=not failures,
        mode=mode,
        method="enumerate" if enumerate_all else "shots",
        inputs=len(inputs),
        runs=runs,
        min_fidelity=min_fid,
        failures=failures,
        seed=None if enumerate_all else (seed or 0),
    )


@dataclass
class RunStats:
    shots: int
    seed: int
    mode: str
    outcome_frequencies: dict[str, int]
    first_measurement: dict[str, int]
    rounds_histogram: dict[int, int]
    mean_rounds: float
    fidelities: list[float] | None

    @property
    def min_fidelity(self) -> float | None:
        return min(self.fidelities) if self.fidelities else None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        del d["fidelities"]
        d["min_fidelity"] = self.min_fidelity
        d["rounds_histogram"] = [[k, v] for k, v in sorted(self.rounds_histogram.items())]
        return d


def _outcome_key(outcomes: Sequence[int]) -> str:
    return "".join("+" if r == 1 else "-" for r in outcomes)


def run_program_once(
    program: MeasurementProgram,
    logical_input: StateVector,
    seed: int,
    mode: str = "faithful",
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> tuple[ProgramRun, list[dict[str, Any]]]:
    """One seeded run plus its trace records (JSON-ready)."""
    run = execute_program(program, logical_input, mode, make_rng(seed), max_rounds)
    final: dict[str, Any] = {
        "final": True,
        "mode": mode,
        "seed": seed,
        "logical_map": run.logical_map,
        "frame": run.frame.label(),
        "executions": run.executions,
    }
    ir = program.circuit()
    if ir is not None:
        final["fidelity"] = fidelity_mod_phase(program_output(run), direct_simulate(ir, logical_input))
    return run, [*run.records, final]


def run_shots(
    program: MeasurementProgram,
    logical_input: StateVector,
    shots: int,
    seed: int,
    mode: str = "faithful",
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> RunStats:
    """``shots`` independent runs; shot ``i`` uses ``derive_seed(seed, i)``.

    ``outcome_frequencies`` counts the outcome vector of the first pattern
    execution of each shot; rounds count every pattern execution.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    ir = program.circuit()
    want = direct_simulate(ir, logical_input) if ir is not None else None
    freq: Counter[str] = Counter()
    first: Counter[str] = Counter()
    hist: Counter[int] = Counter()
    fids: list[float] = []
    for i in range(shots):
        run = execute_program(program, logical_input, mode, make_rng(derive_seed(seed, i)), max_rounds)
        hist[run.executions] += 1
        if run.outcome_log:
            freq[_outcome_key(run.outcome_log[0])] += 1
            first["+1" if run.outcome_log[0][0] == 1 else "-1"] += 1
        if want is not None:
            fids.append(fidelity_mod_phase(program_output(run), want))
    mean = sum(k * v for k, v in hist.items()) / shots
    return RunStats(
        shots=shots,
        seed=seed,
        mode=mode,
        outcome_frequencies=dict(sorted(freq.items())),
        first_measurement=dict(sorted(first.items())),
        rounds_histogram=dict(sorted(hist.items())),
        mean_rounds=mean,
        fidelities=fids if want is not None else None,
    )
