"""Lower {H, T, TDG, X, Y, Z, CNOT} circuits to measurement programs.

Circuit text (``.qc``)::

    # comment
    qubits 2
    H 0
    CNOT 0 1

Allocation keeps exactly one auxiliary qubit. A single-qubit step moves
its logical qubit onto the auxiliary, and the measured-out source becomes
the next auxiliary. A CNOT step leaves both operands in place and gives
its auxiliary back.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, NamedTuple

from .patterns import (
    MeasurementPattern,
    PatternError,
    cnot_pattern,
    generalized_transfer_pattern,
)
from .statevec import CNOT, GATES, GateMatrix, H, I, StateVector, apply_gate

PROGRAM_VERSION = 1
GATE_ARITY = {"H": 1, "T": 1, "TDG": 1, "X": 1, "Y": 1, "Z": 1, "CNOT": 2}
DAGGER_RESOLUTION = {"T": "X-Y", "TDG": "X+Y"}

# Teleportation-based model used as the comparison baseline.
BASELINE = {
    "model": "teleportation",
    "auxiliary_per_1q_step": 2,
    "auxiliary_per_2q_step": 4,
    "observable_family": ["X*X", "Z*Z", "X*Z", "X+Y*X"],
    "observable_family_size": 4,
}


class CircuitParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1) -> None:
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ProgramFormatError(ValueError):
    """Malformed program file."""


class Gate(NamedTuple):
    kind: str
    qubits: tuple[int, ...]
    line: int = 0


@dataclass
class CircuitIR:
    num_logical: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.num_logical < 1:
            raise ValueError("circuit needs at least one qubit")
        for g in self.gates:
            if GATE_ARITY.get(g.kind) != len(g.qubits):
                raise ValueError(f"bad gate {g}")
            if len(set(g.qubits)) != len(g.qubits):
                raise ValueError(f"repeated operand in {g}")
            if any(not 0 <= q < self.num_logical for q in g.qubits):
                raise ValueError(f"operand out of range in {g}")

    def to_text(self) -> str:
        lines = [f"qubits {self.num_logical}"]
        lines += [" ".join([g.kind, *map(str, g.qubits)]) for g in self.gates]
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()


def parse_circuit(text: str) -> CircuitIR:
    num: int | None = None
    gates: list[Gate] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        words = body.split()
        if not words:
            continue
        col = body.index(words[0]) + 1
        if num is None:
            if words[0] != "qubits":
                raise CircuitParseError("missing 'qubits N' header", lineno, col)
            if len(words) != 2 or not words[1].isdigit() or int(words[1]) < 1:
                raise CircuitParseError("header must be 'qubits N' with N >= 1", lineno, col)
            num = int(words[1])
            continue
        kind = words[0]
        if kind not in GATE_ARITY:
            raise CircuitParseError(f"unknown gate {kind!r}", lineno, col)
        operands = words[1:]
        if len(operands) != GATE_ARITY[kind]:
            raise CircuitParseError(
                f"{kind} takes {GATE_ARITY[kind]} operand(s), got {len(operands)}", lineno, col
            )
        qubits = []
        pos = col + len(kind)
        for word in operands:
            pos = body.index(word, pos)
            if not word.isdigit():
                raise CircuitParseError(f"bad qubit index {word!r}", lineno, pos + 1)
            q = int(word)
            if q >= num:
                raise CircuitParseError(f"qubit {q} out of range for {num} qubits", lineno, pos + 1)
            qubits.append(q)
            pos += len(word)
        if len(set(qubits)) != len(qubits):
            raise CircuitParseError(f"{kind} operands must be distinct", lineno, col)
        gates.append(Gate(kind, tuple(qubits), lineno))
    if num is None:
        raise CircuitParseError("missing 'qubits N' header", max(1, len(text.splitlines())))
    return CircuitIR(num, gates)


def direct_simulate(ir: CircuitIR, state: StateVector) -> StateVector:
    """Reference output: apply each gate matrix in order."""
    if state.num_qubits != ir.num_logical:
        raise ValueError(f"circuit has {ir.num_logical} qubits, state has {state.num_qubits}")
    for g in ir.gates:
        gate = CNOT if g.kind == "CNOT" else GATES[g.kind]
        state = apply_gate(state, gate, list(g.qubits))
    return state


# ---------------------------------------------------------------------- families


def slot(shape_token: str) -> str:
    """Family slot of a qubit-free token; ``X+Y`` and ``X-Y`` share one."""
    return "*".join("X±Y" if a in ("X+Y", "X-Y") else a for a in shape_token.split("*"))


@dataclass(frozen=True)
class ObservableFamily:
    name: str
    slots: frozenset[str]

    def allows(self, shape_token: str) -> bool:
        return slot(shape_token) in self.slots

    @property
    def two_qubit_slots(self) -> list[str]:
        return sorted(s for s in self.slots if "*" in s)


O1 = ObservableFamily("O1", frozenset({"Z", "X", "X±Y", "Z*Z", "Z*X"}))
O2 = ObservableFamily("O2", frozenset({"Z", "X", "X±Y", "Z*X"}))
FAMILIES = {"O1": O1, "O2": O2}


def family_by_name(name: str | ObservableFamily) -> ObservableFamily:
    if isinstance(name, ObservableFamily):
        return name
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown observable family {name!r}") from None


# ---------------------------------------------------------------------- programs


@dataclass
class ProgramStep:
    op: str
    logical: tuple[int, ...]
    pattern: MeasurementPattern

    @property
    def gate(self) -> str:
        return self.pattern.gate_label

    def to_dict(self) -> dict[str, Any]:
        return {"op": self.op, "logical": list(self.logical), **self.pattern.to_dict()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> ProgramStep:
        return cls(d["op"], tuple(d["logical"]), MeasurementPattern.from_dict(d))


@dataclass
class MeasurementProgram:
    num_logical: int
    num_physical: int
    initial_map: list[int]
    steps: list[ProgramStep]
    family: str
    metadata: dict[str, Any] = field(default_factory=dict)

    def circuit(self) -> CircuitIR | None:
        gates = self.metadata.get("circuit")
        if gates is None:
            return None
        return CircuitIR(self.num_logical, [Gate(g[0], tuple(g[1:])) for g in gates])

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": PROGRAM_VERSION,
            "family": self.family,
            "num_logical": self.num_logical,
            "num_physical": self.num_physical,
            "initial_map": list(self.initial_map),
            "steps": [s.to_dict() for s in self.steps],
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> MeasurementProgram:
        try:
            d = json.loads(text)
            if d.get("version") != PROGRAM_VERSION:
                raise ProgramFormatError(f"unsupported program version {d.get('version')!r}")
            family_by_name(d["family"])
            return cls(
                num_logical=int(d["num_logical"]),
                num_physical=int(d["num_physical"]),
                initial_map=[int(q) for q in d["initial_map"]],
                steps=[ProgramStep.from_dict(s) for s in d["steps"]],
                family=d["family"],
                metadata=d.get("metadata", {}),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, PatternError) as exc:
            if isinstance(exc, ProgramFormatError):
                raise
            raise ProgramFormatError(f"malformed program: {exc}") from exc


def _lowering(kind: str, family: str) -> list[tuple[GateMatrix, GateMatrix]]:
    """``(u, v)`` generalized-transfer steps for a single-qubit gate."""
    g = GATES[kind]
    if family == "O1":
        return [(g, I)]
    if kind == "H":
        return [(I, H)]
    # H . (H . g) = g; Pauli and T-type gates only change the first step's signs/axis
    return [(g, H), (I, H)]


def compile_circuit(ir: CircuitIR, family: str | ObservableFamily = "O1") -> MeasurementProgram:
    fam = family_by_name(family)
    n = ir.num_logical
    where = list(range(n))
    aux = n
    steps: list[ProgramStep] = []
    for g in ir.gates:
        if g.kind == "CNOT":
            c, t = g.qubits
            steps.append(ProgramStep(g.kind, g.qubits, cnot_pattern(where[c], where[t], aux)))
            continue
        (l,) = g.qubits
        for u, v in _lowering(g.kind, fam.name):
            pattern = generalized_transfer_pattern(u, v, where[l], aux)
            steps.append(ProgramStep(g.kind, g.qubits, pattern))
            where[l], aux = aux, where[l]
    for st in steps:
        for obs in st.pattern.measurements:
            if not fam.allows(obs.shape_token):
                raise PatternError(f"{obs.token} is outside family {fam.name}")
    return MeasurementProgram(
        num_logical=n,
        num_physical=n + 1 if steps else n,
        initial_map=list(range(n)),
        steps=steps,
        family=fam.name,
        metadata={
            "source_sha256": ir.sha256(),
            "circuit": [[g.kind, *g.qubits] for g in ir.gates],
            "dagger_resolution": dict(DAGGER_RESOLUTION),
        },
    )


# ----------------------------------------------------------------------- reports


def observables_report(program: MeasurementProgram) -> dict[str, Any]:
    """Census of qubit-free observable tokens used by the program's steps."""
    tokens: Counter[str] = Counter()
    for st in program.steps:
        tokens.update(o.shape_token for o in st.pattern.measurements)
    slots: Counter[str] = Counter()
    for tok, count in tokens.items():
        slots[slot(tok)] += count
    two_qubit = sorted(s for s in slots if "*" in s)
    fam = family_by_name(program.family)
    return {
        "family": fam.name,
        "tokens": dict(sorted(tokens.items())),
        "slots": dict(sorted(slots.items())),
        "distinct_tokens": len(tokens),
        "distinct_slots": len(slots),
        "two_qubit_slots": two_qubit,
        "two_qubit_count": len(two_qubit),
        "within_family": all(fam.allows(t) for t in tokens),
    }


def pattern_resources(pattern: MeasurementPattern) -> dict[str, int]:
    return {
        "auxiliary_qubits": len(pattern.auxiliary_qubits),
        "measurements": len(pattern.measurements),
        "two_qubit_measurements": sum(len(o.qubits) == 2 for o in pattern.measurements),
    }


def resource_report(program: MeasurementProgram) -> dict[str, Any]:
    measurements = [o for st in program.steps for o in st.pattern.measurements]
    two_qubit_gates = any(len(st.logical) == 2 for st in program.steps)
    if not program.steps:
        baseline_aux = 0
    else:
        baseline_aux = BASELINE["auxiliary_per_2q_step" if two_qubit_gates else "auxiliary_per_1q_step"]
    return {
        "family": program.family,
        "num_logical": program.num_logical,
        "num_physical": program.num_physical,
        "auxiliary_qubits": program.num_physical - program.num_logical,
        "steps": len(program.steps),
        "total_measurements": len(measurements),
        "two_qubit_measurement_count": sum(len(o.qubits) == 2 for o in measurements),
        "baseline_comparison": {**BASELINE, "auxiliary_qubits": baseline_aux},
    }

