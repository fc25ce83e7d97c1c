"""Measurement patterns with their outcome-to-byproduct rules.

A pattern is an ordered list of two-outcome measurements. Each
measurement carries a sign: the outcome fed to the byproduct rule is the
physical outcome of the listed token times that sign. Signs appear when a
pattern is conjugated by a Pauli, which maps an axis to minus itself.

Every pattern "steps-simulates" a gate: for each outcome vector the output
qubits hold ``byproduct(outcomes) * gate * input`` up to global phase.
"""

from __future__ import annotations

import functools
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import Any, Protocol

import numpy as np

from .observables import (
    Axis,
    Observable,
    ObservableError,
    common_eigenstate,
    force_outcome,
    identify_axis,
    measure,
)
from .statevec import (
    GateMatrix,
    I,
    StateError,
    StateVector,
    apply_matrix,
    gate_from_label,
)

RULES = ("transfer", "gst", "cnot", "teleport")


class UnsupportedObservableError(ObservableError):
    """A conjugated observable falls outside the supported axis set."""


class NotCliffordError(ValueError):
    """The post-rotation of a generalized transfer is not Clifford."""


class PatternError(ValueError):
    """Malformed pattern or outcome vector."""


# --------------------------------------------------------------------------- Pauli


@dataclass(frozen=True)
class PauliOp:
    """Phase-free Pauli operator as per-qubit ``(x, z)`` bits.

    Only non-identity qubits are stored. ``*`` composes by XOR, so every
    element is its own inverse.
    """

    bits: tuple[tuple[int, int, int], ...] = ()

    def __post_init__(self) -> None:
        merged: dict[int, tuple[int, int]] = {}
        for q, x, z in self.bits:
            ox, oz = merged.get(q, (0, 0))
            merged[q] = (ox ^ (x & 1), oz ^ (z & 1))
        clean = tuple(sorted((q, x, z) for q, (x, z) in merged.items() if x or z))
        object.__setattr__(self, "bits", clean)

    @classmethod
    def identity(cls) -> PauliOp:
        return cls()

    @classmethod
    def from_dict(cls, d: Mapping[int, tuple[int, int]]) -> PauliOp:
        return cls(tuple((q, x, z) for q, (x, z) in d.items()))

    @classmethod
    def single(cls, q: int, label: str) -> PauliOp:
        return cls(((q, *_LABEL_BITS[label]),))

    @classmethod
    def parse(cls, text: str) -> PauliOp:
        """Inverse of :meth:`label`: ``"I"`` or ``"X@0*XZ@2"``."""
        if text == "I":
            return cls()
        out = []
        for part in text.split("*"):
            label, _, q = part.partition("@")
            if label not in _LABEL_BITS or not q.isdigit():
                raise PatternError(f"bad Pauli {text!r}")
            out.append((int(q), *_LABEL_BITS[label]))
        return cls(tuple(out))

    def as_dict(self) -> dict[int, tuple[int, int]]:
        return {q: (x, z) for q, x, z in self.bits}

    def on(self, q: int) -> tuple[int, int]:
        return self.as_dict().get(q, (0, 0))

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _, _ in self.bits)

    def is_identity(self) -> bool:
        return not self.bits

    def __mul__(self, other: PauliOp) -> PauliOp:
        return PauliOp(self.bits + other.bits)

    def restrict(self, qubits: Iterable[int]) -> PauliOp:
        keep = set(qubits)
        return PauliOp(tuple(b for b in self.bits if b[0] in keep))

    def relocate(self, mapping: Mapping[int, int]) -> PauliOp:
        return PauliOp(tuple((mapping.get(q, q), x, z) for q, x, z in self.bits))

    def label(self) -> str:
        if not self.bits:
            return "I"
        return "*".join(f"{_BITS_LABEL[(x, z)]}@{q}" for q, x, z in self.bits)

    def local_label(self, q: int) -> str:
        return _BITS_LABEL.get(self.on(q), "I")

    def __str__(self) -> str:
        return self.label()


_LABEL_BITS = {"I": (0, 0), "X": (1, 0), "Z": (0, 1), "XZ": (1, 1)}
_BITS_LABEL = {(1, 0): "X", (0, 1): "Z", (1, 1): "XZ"}
_PAULI = {
    (0, 0): np.eye(2, dtype=np.complex128),
    (1, 0): Axis.X.matrix,
    (0, 1): Axis.Z.matrix,
    (1, 1): Axis.X.matrix @ Axis.Z.matrix,
}


def pauli_matrix(x: int, z: int) -> np.ndarray:
    """``X^x Z^z`` as a 2x2 matrix."""
    return _PAULI[(x & 1, z & 1)]


def apply_pauli(state: StateVector, op: PauliOp) -> StateVector:
    for q, x, z in op.bits:
        state = apply_matrix(state, pauli_matrix(x, z), [q])
    return state


def conjugate_bits(u: np.ndarray, x: int, z: int) -> tuple[int, int]:
    """Bits of ``u X^x Z^z u^dagger`` (phase dropped); raises if not Pauli."""
    img = u @ pauli_matrix(x, z) @ u.conj().T
    for bits, p in _PAULI.items():
        ratio = np.vdot(p, img) / 2
        if abs(abs(ratio) - 1) < 1e-9 and np.allclose(img, ratio * p, atol=1e-9):
            return bits
    raise NotCliffordError("operator does not map Paulis to Paulis")


# ------------------------------------------------------------------------ pattern

DetachSpec = tuple[tuple[int, ...], tuple[int, ...]]


@dataclass(frozen=True, eq=False)
class MeasurementPattern:
    """One step of simulation expressed as measurements.

    ``detach`` lists ``(qubits, measurement_indices)``: after the pattern
    those qubits hold the joint eigenstate of the indexed measurements at
    their physical outcomes. ``roles`` names the qubits the byproduct rule
    refers to. ``v_map`` holds the bit images of X and Z under the
    post-rotation of a generalized transfer. ``fold`` is a fixed Pauli
    composed into every byproduct.
    """

    measurements: tuple[Observable, ...]
    signs: tuple[int, ...]
    input_qubits: tuple[int, ...]
    auxiliary_qubits: tuple[int, ...]
    output_map: Mapping[int, int]
    byproduct_rule: str
    roles: Mapping[str, int]
    gate_label: str
    detach: tuple[DetachSpec, ...]
    aux_init: Mapping[int, str] = field(default_factory=dict)
    v_map: tuple[tuple[int, int], tuple[int, int]] = ((1, 0), (0, 1))
    fold: PauliOp = PauliOp()
    gate: GateMatrix | None = None

    def __post_init__(self) -> None:
        if self.byproduct_rule not in RULES:
            raise PatternError(f"unknown byproduct rule {self.byproduct_rule!r}")
        if len(self.signs) != len(self.measurements):
            raise PatternError("one sign per measurement required")

    @property
    def tokens(self) -> list[str]:
        return [m.token for m in self.measurements]

    @property
    def qubits(self) -> tuple[int, ...]:
        qs = set(self.input_qubits) | set(self.auxiliary_qubits)
        for m in self.measurements:
            qs.update(m.qubits)
        return tuple(sorted(qs))

    @property
    def output_qubits(self) -> tuple[int, ...]:
        return tuple(self.output_map[q] for q in self.input_qubits)

    @property
    def detached_qubits(self) -> tuple[int, ...]:
        return tuple(q for qs, _ in self.detach for q in qs)

    def gate_matrix(self) -> GateMatrix:
        return self.gate if self.gate is not None else gate_from_label(self.gate_label)

    def relabel(self, mapping: Mapping[int, int]) -> MeasurementPattern:
        """Rebind physical qubits; unmapped qubits stay put."""
        m = lambda q: mapping.get(q, q)  # noqa: E731
        return replace(
            self,
            measurements=tuple(o.relabel(dict(mapping)) for o in self.measurements),
            input_qubits=tuple(m(q) for q in self.input_qubits),
            auxiliary_qubits=tuple(m(q) for q in self.auxiliary_qubits),
            output_map={m(k): m(v) for k, v in self.output_map.items()},
            roles={k: m(v) for k, v in self.roles.items()},
            detach=tuple((tuple(m(q) for q in qs), idx) for qs, idx in self.detach),
            aux_init={m(q): s for q, s in self.aux_init.items()},
            fold=self.fold.relocate(mapping),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "gate": self.gate_label,
            "inputs": list(self.input_qubits),
            "aux": list(self.auxiliary_qubits),
            "measurements": self.tokens,
            "signs": list(self.signs),
            "output_map": {str(k): v for k, v in sorted(self.output_map.items())},
            "byproduct_rule": self.byproduct_rule,
            "roles": dict(sorted(self.roles.items())),
            "v_map": {"X": _BITS_NAME[self.v_map[0]], "Z": _BITS_NAME[self.v_map[1]]},
            "fold": self.fold.label(),
            "detach": [[list(qs), list(idx)] for qs, idx in self.detach],
            "aux_init": {str(k): v for k, v in sorted(self.aux_init.items())},
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> MeasurementPattern:
        try:
            return cls(
                measurements=tuple(Observable.parse(t) for t in d["measurements"]),
                signs=tuple(int(s) for s in d["signs"]),
                input_qubits=tuple(d["inputs"]),
                auxiliary_qubits=tuple(d["aux"]),
                output_map={int(k): int(v) for k, v in d["output_map"].items()},
                byproduct_rule=d["byproduct_rule"],
                roles={k: int(v) for k, v in d["roles"].items()},
                gate_label=d["gate"],
                detach=tuple((tuple(qs), tuple(idx)) for qs, idx in d["detach"]),
                aux_init={int(k): v for k, v in d.get("aux_init", {}).items()},
                v_map=(_NAME_BITS[d["v_map"]["X"]], _NAME_BITS[d["v_map"]["Z"]]),
                fold=PauliOp.parse(d.get("fold", "I")),
            )
        except (KeyError, TypeError) as exc:
            raise PatternError(f"malformed pattern record: {exc}") from exc


_BITS_NAME = {(1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_NAME_BITS = {v: k for k, v in _BITS_NAME.items()}


# ------------------------------------------------------------------ constructors


def _gate_name(u: GateMatrix, v: GateMatrix) -> str:
    names = [g.name for g in (v, u) if g.name != "I"]
    return ".".join(names) if names else "I"


def _aux_init_for(first: Observable, aux: int) -> dict[int, str]:
    # Fresh auxiliaries start unbiased with respect to their first measurement.
    axis = dict(first.terms)[aux]
    return {aux: "+" if axis is Axis.Z else "0"}


def _conjugated(matrix: np.ndarray) -> tuple[int, Axis]:
    found = identify_axis(matrix)
    if found is None:
        raise UnsupportedObservableError("conjugated observable is not in the supported axis set")
    return found


@functools.lru_cache(maxsize=512)
def generalized_transfer_pattern(
    u: GateMatrix, v: GateMatrix, a: int, b: int
) -> MeasurementPattern:
    """State transfer from ``a`` to ``b`` with ``u`` before and ``v`` after.

    The a-side observables are conjugated as ``u^dg O u`` and the b-side
    ones as ``v O v^dg``. Every branch leaves ``v sigma u |phi>`` on ``b``;
    the reported byproduct is ``v sigma v^dg`` so that the output reads
    ``byproduct * (v u) |phi>``. ``v`` must be Clifford.

    Results are cached per ``(u, v, a, b)``; gates hash by identity.
    """
    if a == b:
        raise PatternError("source and target qubit must differ")
    if u.arity != 1 or v.arity != 1:
        raise PatternError("generalized transfer takes single-qubit gates")
    try:
        v_map = (conjugate_bits(v.matrix, 1, 0), conjugate_bits(v.matrix, 0, 1))
    except NotCliffordError:
        raise NotCliffordError(f"post-rotation {v.name!r} is not Clifford") from None
    um, vm = u.matrix, v.matrix
    s_bx, ax_bx = _conjugated(vm @ Axis.X.matrix @ vm.conj().T)
    s_bz, ax_bz = _conjugated(vm @ Axis.Z.matrix @ vm.conj().T)
    s_az, ax_az = _conjugated(um.conj().T @ Axis.Z.matrix @ um)
    s_ax, ax_ax = _conjugated(um.conj().T @ Axis.X.matrix @ um)
    measurements = (
        Observable.single(ax_bx, b),
        Observable.pair(ax_az, a, ax_bz, b),
        Observable.single(ax_ax, a),
    )
    gate = GateMatrix(vm @ um, _gate_name(u, v))
    return MeasurementPattern(
        measurements=measurements,
        signs=(s_bx, s_az * s_bz, s_ax),
        input_qubits=(a,),
        auxiliary_qubits=(b,),
        output_map={a: b},
        byproduct_rule="gst",
        roles={"a": a, "b": b},
        gate_label=gate.name,
        detach=(((a,), (2,)),),
        aux_init=_aux_init_for(measurements[0], b),
        v_map=v_map,
        gate=gate,
    )


def transfer_pattern(a: int, b: int) -> MeasurementPattern:
    """Plain state transfer: measure ``X@b``, ``Z@a*Z@b``, ``X@a``."""
    return replace(generalized_transfer_pattern(I, I, a, b), byproduct_rule="transfer")


def cnot_pattern(a: int, b: int, c: int) -> MeasurementPattern:
    """CNOT (control ``a``, target ``b``) with one auxiliary ``c``."""
    if len({a, b, c}) != 3:
        raise PatternError("cnot pattern needs three distinct qubits")
    measurements = (
        Observable.single(Axis.Z, c),
        Observable.pair(Axis.Z, a, Axis.X, c),
        Observable.pair(Axis.Z, c, Axis.X, b),
        Observable.single(Axis.X, c),
    )
    return MeasurementPattern(
        measurements=measurements,
        signs=(1, 1, 1, 1),
        input_qubits=(a, b),
        auxiliary_qubits=(c,),
        output_map={a: a, b: b},
        byproduct_rule="cnot",
        roles={"a": a, "b": b, "c": c},
        gate_label="CNOT",
        detach=(((c,), (3,)),),
        aux_init={c: "+"},
    )


def teleport_pattern(a: int, b: int, c: int) -> MeasurementPattern:
    """Teleport ``a`` to ``c`` with two Bell measurements, each split into
    commuting ``X*X`` and ``Z*Z`` halves."""
    if len({a, b, c}) != 3:
        raise PatternError("teleport pattern needs three distinct qubits")
    measurements = (
        Observable.pair(Axis.X, b, Axis.X, c),
        Observable.pair(Axis.Z, b, Axis.Z, c),
        Observable.pair(Axis.X, a, Axis.X, b),
        Observable.pair(Axis.Z, a, Axis.Z, b),
    )
    return MeasurementPattern(
        measurements=measurements,
        signs=(1, 1, 1, 1),
        input_qubits=(a,),
        auxiliary_qubits=(b, c),
        output_map={a: c},
        byproduct_rule="teleport",
        roles={"a": a, "b": b, "c": c},
        gate_label="I",
        detach=(((a, b), (2, 3)),),
        # |00> would make the Z*Z half of the first Bell measurement deterministic
        aux_init={b: "+", c: "0"},
    )


# ------------------------------------------------------------------- byproducts


def _exp(*outcomes: int) -> int:
    """``(1 - product) / 2`` as a bit."""
    return (1 - math.prod(int(r) for r in outcomes)) // 2


def _rule_transfer(o: Sequence[int], roles: Mapping[str, int]) -> PauliOp:
    j, k, l = o
    return PauliOp(((roles["b"], _exp(k), _exp(j, l)),))


def _rule_cnot(o: Sequence[int], roles: Mapping[str, int]) -> PauliOp:
    j, k, l, m = o
    return PauliOp(((roles["a"], 0, _exp(j, l)), (roles["b"], _exp(k, m), 0)))


def _rule_teleport(o: Sequence[int], roles: Mapping[str, int]) -> PauliOp:
    j, k, l, m = o
    return PauliOp(((roles["c"], _exp(k, m), _exp(j, l)),))


def byproduct(pattern: MeasurementPattern, outcomes: Sequence[int]) -> PauliOp:
    """Closed-form byproduct for physical ``outcomes``; no state access."""
    if len(outcomes) != len(pattern.measurements):
        raise PatternError(
            f"expected {len(pattern.measurements)} outcomes, got {len(outcomes)}"
        )
    logical = [int(r) * s for r, s in zip(outcomes, pattern.signs)]
    rule = pattern.byproduct_rule
    if rule == "cnot":
        sigma = _rule_cnot(logical, pattern.roles)
    elif rule == "teleport":
        sigma = _rule_teleport(logical, pattern.roles)
    else:
        sigma = _rule_transfer(logical, pattern.roles)
        if rule == "gst":
            b = pattern.roles["b"]
            x, z = sigma.on(b)
            (xx, xz), (zx, zz) = pattern.v_map
            sigma = PauliOp(((b, (x * xx) ^ (z * zx), (x * xz) ^ (z * zz)),))
    return sigma * pattern.fold


# --------------------------------------------------------------------- execution


class OutcomeSource(Protocol):
    def measure(self, state: StateVector, obs: Observable) -> tuple[int, StateVector, float]: ...


class Sampler:
    """Born-rule sampling from a seeded generator (one draw per measurement)."""

    def __init__(self, rng: Any) -> None:
        self.rng = rng

    def measure(self, state: StateVector, obs: Observable) -> tuple[int, StateVector, float]:
        return measure(state, obs, self.rng)


class Forced:
    """Replays a fixed outcome sequence."""

    def __init__(self, outcomes: Iterable[int]) -> None:
        self.outcomes = list(outcomes)
        self.pos = 0

    def measure(self, state: StateVector, obs: Observable) -> tuple[int, StateVector, float]:
        if self.pos >= len(self.outcomes):
            raise PatternError("forced outcome sequence exhausted")
        want = self.outcomes[self.pos]
        self.pos += 1
        post, p = force_outcome(state, obs, want)
        return want, post, p


def as_source(source: Any) -> OutcomeSource:
    if hasattr(source, "measure"):
        return source
    if hasattr(source, "random"):
        return Sampler(source)
    return Forced(source)


def initial_aux_state(setting: str) -> StateVector:
    s2 = 1 / np.sqrt(2)
    return StateVector([1, 0] if setting == "0" else [s2, s2])


def detach_expectations(
    pattern: MeasurementPattern, outcomes: Sequence[int]
) -> list[tuple[tuple[int, ...], StateVector]]:
    """Expected states of the measured-out qubits for physical ``outcomes``."""
    out = []
    for qubits, idx in pattern.detach:
        obs = [pattern.measurements[i] for i in idx]
        out.append((qubits, common_eigenstate(obs, [outcomes[i] for i in idx], list(qubits))))
    return out


@dataclass
class PatternRun:
    state: StateVector
    outcomes: list[int]
    byproduct: PauliOp
    probability: float


def run_pattern(state: StateVector, pattern: MeasurementPattern, source: Any) -> PatternRun:
    """Apply the pattern's measurements in order.

    ``source`` is a seeded generator, an explicit outcome vector, or any
    object with a ``measure(state, obs)`` method. Measured-out qubits stay
    in the returned state.
    """
    if max(pattern.qubits) >= state.num_qubits:
        raise StateError(f"pattern touches qubit {max(pattern.qubits)} outside the register")
    if isinstance(source, (list, tuple)) and len(source) != len(pattern.measurements):
        raise PatternError(
            f"forced vector has {len(source)} outcomes, pattern has {len(pattern.measurements)}"
        )
    src = as_source(source)
    outcomes = []
    prob = 1.0
    for obs in pattern.measurements:
        r, state, p = src.measure(state, obs)
        outcomes.append(r)
        prob *= p
    return PatternRun(state, outcomes, byproduct(pattern, outcomes), prob)
