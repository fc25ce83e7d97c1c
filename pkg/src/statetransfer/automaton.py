"""Full simulation of a step: repeat until the residual Pauli is the identity.

Two execution modes are supported:

``faithful``
    After each step the residual byproduct is removed physically by
    running correction steps until it is the identity.
``tracked``
    Each step runs once. Byproducts accumulate in a classical Pauli frame
    and later patterns measure frame-conjugated observables. The frame is
    applied to the final state. This is an extension, not a repetition
    scheme, and traces mark it with ``"mode": "tracked"``.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any

import numpy as np

from .observables import Observable, identify_axis
from .patterns import (
    MeasurementPattern,
    PatternError,
    PauliOp,
    apply_pauli,
    as_source,
    detach_expectations,
    generalized_transfer_pattern,
    pauli_matrix,
    run_pattern,
    transfer_pattern,
)
from .statevec import (
    H,
    I,
    GateMatrix,
    StateVector,
    X,
    Y,
    Z,
    detach_qubits,
    embed,
    factor_state,
    kron,
    permute_qubits,
)

if TYPE_CHECKING:
    from .compiler import MeasurementProgram

MODES = ("faithful", "tracked")
DEFAULT_MAX_ROUNDS = 1000


class MaxRoundsExceeded(RuntimeError):
    """The correction loop did not reach the identity within ``max_rounds``."""


def pauli_gate(x: int, z: int) -> GateMatrix:
    return {(0, 0): I, (1, 0): X, (0, 1): Z, (1, 1): Y}[(x & 1, z & 1)]


def correction_pattern(sigma: PauliOp, a: int, b: int) -> MeasurementPattern:
    """Step of simulation of a single-qubit Pauli on ``a``, output on ``b``.

    Pauli conjugation only flips signs of X and Z, so the observables are
    those of plain transfer; the signs carry the correction.
    """
    if len(sigma.qubits) > 1:
        raise PatternError("correction patterns act on one qubit; split the byproduct")
    if sigma.is_identity():
        return transfer_pattern(a, b)
    x, z = sigma.on(sigma.qubits[0])
    return generalized_transfer_pattern(pauli_gate(x, z), I, a, b)


def correction_round(
    tau: tuple[int, int], at: int, aux: int, family: str
) -> list[MeasurementPattern]:
    """First pattern(s) of one correction round for residual bits ``tau``.

    Under O2 a round is two Hadamard steps; the second one is built at run
    time from the first one's byproduct (see :func:`_correct_once`).
    """
    if family == "O1":
        return [correction_pattern(PauliOp(((at, *tau),)), at, aux)]
    return [generalized_transfer_pattern(pauli_gate(*tau), H, at, aux)]


@dataclass
class StepResult:
    final_state: StateVector
    rounds: int
    outcome_log: list[list[int]]
    residual: PauliOp
    locations: dict[int, int]
    free: list[int]
    dead: dict[tuple[int, ...], StateVector]
    executed: list[MeasurementPattern] = field(default_factory=list)
    first_byproduct: PauliOp = PauliOp()


class _Run:
    """Mutable bookkeeping shared by the correction loop."""

    def __init__(self, state: StateVector, source: Any, max_rounds: int) -> None:
        self.state = state
        self.source = source
        self.max_rounds = max_rounds
        self.rounds = 0
        self.log: list[list[int]] = []
        self.executed: list[MeasurementPattern] = []
        self.dead: dict[tuple[int, ...], StateVector] = {}

    def execute(self, pattern: MeasurementPattern) -> PauliOp:
        if self.rounds >= self.max_rounds:
            raise MaxRoundsExceeded(
                f"residual byproduct not cleared after {self.max_rounds} pattern executions"
            )
        touched = set(pattern.qubits)
        stale = [g for g in self.dead if touched & set(g)]
        for g in stale:
            del self.dead[g]
        run = run_pattern(self.state, pattern, self.source)
        self.state = run.state
        self.rounds += 1
        self.log.append(run.outcomes)
        self.executed.append(pattern)
        for g in stale:
            survivors = tuple(q for q in g if q not in touched)
            if survivors:
                self.dead[survivors] = factor_state(self.state, survivors)
        for qubits, expected in detach_expectations(pattern, run.outcomes):
            self.dead[qubits] = expected
        return run.byproduct


def _correct_once(run: _Run, at: int, aux: int, tau: tuple[int, int], family: str) -> tuple[int, int, PauliOp]:
    """One correction round; returns ``(new_location, new_aux, residual)``."""
    first = correction_round(tau, at, aux, family)[0]
    sigma = run.execute(first)
    if family == "O1":
        return aux, at, sigma
    # Second Hadamard step absorbs the first one's byproduct through its signs.
    second = generalized_transfer_pattern(pauli_gate(*sigma.on(aux)), H, aux, at)
    return at, aux, run.execute(second)


def full_step(
    state: StateVector,
    step: MeasurementPattern,
    mode: str = "faithful",
    max_rounds: int = DEFAULT_MAX_ROUNDS,
    rng: Any = None,
    family: str = "O1",
    order: Sequence[int] | None = None,
) -> StepResult:
    """Run ``step`` and, in faithful mode, correct its byproduct to identity.

    ``order`` gives the input-qubit positions in correction order (the
    program executor passes them sorted by logical index). Multi-qubit
    residuals are corrected one qubit at a time.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    if family not in ("O1", "O2"):
        raise ValueError(f"unknown observable family {family!r}")
    source = as_source(rng if rng is not None else np.random.default_rng())
    run = _Run(state, source, max_rounds)
    first = run.execute(step)
    locations = dict(step.output_map)
    outputs = set(locations.values())
    free = [q for q in step.detached_qubits if q not in outputs]
    residual = first

    if mode == "faithful":
        inputs = list(step.input_qubits)
        for idx in order if order is not None else range(len(inputs)):
            q_in = inputs[idx]
            while True:
                at = locations[q_in]
                tau = residual.on(at)
                if tau == (0, 0):
                    break
                aux = free.pop(0)
                others = residual.restrict(q for q in residual.qubits if q != at)
                new_at, new_free, sigma = _correct_once(run, at, aux, tau, family)
                locations[q_in] = new_at
                free.append(new_free)
                residual = others * sigma
    return StepResult(
        final_state=run.state,
        rounds=run.rounds,
        outcome_log=run.log,
        residual=residual,
        locations=locations,
        free=free,
        dead=run.dead,
        executed=run.executed,
        first_byproduct=first,
    )


# ------------------------------------------------------------------ Pauli frames


@dataclass(frozen=True)
class PauliFrame:
    """Classical Pauli record keyed by the physical qubit currently holding
    each logical qubit; entries travel with their qubits."""

    op: PauliOp = PauliOp()

    def logical(self, logical_map: Sequence[int]) -> PauliOp:
        return self.op.relocate({p: l for l, p in enumerate(logical_map)})


def frame_update(frame: PauliFrame, byproduct: PauliOp, output_map: Mapping[int, int]) -> PauliFrame:
    """Relocate the frame through ``output_map`` and compose the byproduct."""
    outputs = set(output_map.values())
    for q in byproduct.qubits:
        if q not in outputs:
            raise PatternError(f"byproduct on qubit {q} is not an output of the step")
    return PauliFrame(frame.op.relocate(output_map) * byproduct)


def conjugate_for_frame(pattern: MeasurementPattern, frame: PauliFrame | PauliOp) -> MeasurementPattern:
    """Adapt ``pattern`` to an input carrying the Pauli ``frame``.

    Every observable ``O`` becomes ``P O P^dg``; a sign picked up here
    flips the outcome interpretation and an ``X+Y``/``X-Y`` swap changes the
    token. Frame entries on qubits that the pattern measures out are
    absorbed, so they are folded into the byproduct to cancel when the
    frame is relocated by :func:`frame_update`.
    """
    op = frame.op if isinstance(frame, PauliFrame) else frame
    tau = op.restrict(pattern.input_qubits)
    if tau.is_identity():
        return pattern
    measurements = []
    signs = []
    for obs, sign in zip(pattern.measurements, pattern.signs):
        terms = []
        for q, axis in obs.terms:
            x, z = tau.on(q)
            if x or z:
                p = pauli_matrix(x, z)
                flip, axis = identify_axis(p @ axis.matrix @ p.conj().T)
                sign *= flip
            terms.append((q, axis))
        measurements.append(Observable(tuple(terms)))
        signs.append(sign)
    absorbed = tau.restrict(pattern.detached_qubits).relocate(pattern.output_map)
    return replace(
        pattern,
        measurements=tuple(measurements),
        signs=tuple(signs),
        fold=pattern.fold * absorbed,
    )


# --------------------------------------------------------------- program runner


@dataclass
class ProgramRun:
    state: StateVector
    logical_map: list[int]
    dead: dict[tuple[int, ...], StateVector]
    frame: PauliOp
    records: list[dict[str, Any]]
    executions: int
    outcome_log: list[list[int]]
    tokens: list[str]


def execute_program(
    program: MeasurementProgram,
    logical_input: StateVector,
    mode: str = "faithful",
    rng: Any = None,
    max_rounds: int = DEFAULT_MAX_ROUNDS,
) -> ProgramRun:
    """Execute a compiled program on an ``num_logical``-qubit input.

    Compile-time qubit bindings assume no corrections. In faithful mode
    corrections move logical qubits around, so each step is rebound
    through the bijection between compile-time and run-time placement.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    n = program.num_logical
    if logical_input.num_qubits != n:
        raise ValueError(f"program expects {n} logical qubits, input has {logical_input.num_qubits}")
    source = as_source(rng if rng is not None else np.random.default_rng())
    map_c = list(program.initial_map)
    map_r = list(program.initial_map)
    spare = [q for q in range(program.num_physical) if q not in map_c]
    free_c, free_r = list(spare), list(spare)
    zero = StateVector([1, 0])
    state = embed([(list(map_c), logical_input)], program.num_physical)
    dead: dict[tuple[int, ...], StateVector] = {(q,): zero for q in spare}
    frame = PauliFrame()
    records: list[dict[str, Any]] = []
    executions = 0
    outcome_log: list[list[int]] = []
    tokens: list[str] = []

    for i, st in enumerate(program.steps):
        pattern = st.pattern
        binding = {map_c[l]: map_r[l] for l in range(n)}
        binding.update(zip(free_c, free_r))
        bound = pattern.relabel(binding)
        if mode == "tracked":
            bound = conjugate_for_frame(bound, frame)
        order = sorted(range(len(st.logical)), key=lambda k: st.logical[k])
        res = full_step(state, bound, mode, max_rounds, source, program.family, order)
        state = res.final_state
        executions += res.rounds
        outcome_log.extend(res.outcome_log)
        touched = {q for p in res.executed for q in p.qubits}
        dead = {g: s for g, s in dead.items() if not touched & set(g)}
        dead.update(res.dead)
        for l in st.logical:
            map_r[l] = res.locations[binding[map_c[l]]]
        free_r = list(res.free)
        outputs = set(pattern.output_map.values())
        for l in st.logical:
            map_c[l] = pattern.output_map[map_c[l]]
        free_c = [q for q in pattern.detached_qubits if q not in outputs]
        if mode == "tracked":
            frame = frame_update(frame, res.residual, bound.output_map)
        for p in res.executed:
            tokens.extend(p.tokens)
        records.append(
            {
                "step": i,
                "gate": st.gate,
                "logical": list(st.logical),
                "observables": bound.tokens,
                "outcomes": res.outcome_log,
                "byproduct": res.first_byproduct.label(),
                "residual": res.residual.label(),
                "rounds": res.rounds,
                "mode": mode,
            }
        )
    return ProgramRun(
        state=state,
        logical_map=map_r,
        dead=dead,
        frame=frame.logical(map_r),
        records=records,
        executions=executions,
        outcome_log=outcome_log,
        tokens=tokens,
    )


def logical_output(run: ProgramRun, apply_frame: bool = True) -> StateVector:
    """Detach dead qubits, reorder to logical order, undo the Pauli frame."""
    state = run.state
    groups = sorted(run.dead.items())
    if groups:
        qubits = [q for g, _ in groups for q in g]
        state = detach_qubits(state, qubits, kron(*(s for _, s in groups)))
        remaining = sorted(q for q in range(run.state.num_qubits) if q not in qubits)
    else:
        remaining = list(range(state.num_qubits))
    order = [remaining.index(p) for p in run.logical_map]
    state = permute_qubits(state, order)
    if apply_frame and not run.frame.is_identity():
        state = apply_pauli(state, run.frame)
    return state
