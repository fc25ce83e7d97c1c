"""Dense pure-state vectors over qubits.

Qubit ``q`` is bit ``q`` of the amplitude index, so qubit 0 is the least
significant bit. Bitstrings are written qubit 0 first: ``"10"`` means
qubit 0 is ``1`` and qubit 1 is ``0``.

A gate acting on an ordered qubit list ``[q0, q1]`` uses the textbook
matrix layout in which ``q0`` is the most significant local bit, so the
CNOT matrix with ``qubits=[control, target]`` behaves as printed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NORM_TOL = 1e-6
UNITARY_TOL = 1e-9
DETACH_TOL = 1e-7


class StateError(ValueError):
    """Malformed state, gate or qubit addressing."""


class EntangledQubitError(StateError):
    """The qubits to detach are entangled with the rest of the register."""


class MarginalMismatchError(StateError):
    """The qubits to detach are unentangled but not in the expected state."""


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized amplitude array over ``num_qubits`` qubits.

    Instances are treated as immutable; the amplitude buffer is marked
    read-only on construction.
    """

    amplitudes: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def num_qubits(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        """Amplitudes reshaped to ``[2] * n`` with axis ``i`` = qubit ``n-1-i``."""
        return self.amplitudes.reshape((2,) * self.num_qubits)

    def __repr__(self) -> str:
        return f"StateVector(num_qubits={self.num_qubits}, amplitudes={self.amplitudes!r})"


@dataclass(frozen=True, eq=False)
class GateMatrix:
    """Unitary on one or two qubits."""

    matrix: np.ndarray
    name: str = "U"

    def __post_init__(self) -> None:
        m = np.array(self.matrix, dtype=np.complex128)
        if m.shape not in ((2, 2), (4, 4)):
            raise StateError(f"gate must be 2x2 or 4x4, got shape {m.shape}")
        if not np.allclose(m @ m.conj().T, np.eye(m.shape[0]), atol=UNITARY_TOL, rtol=0):
            raise StateError(f"gate {self.name!r} is not unitary")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def arity(self) -> int:
        return 1 if self.matrix.shape[0] == 2 else 2

    def dagger(self, name: str | None = None) -> GateMatrix:
        return GateMatrix(self.matrix.conj().T, name or f"{self.name}^dg")

    def __matmul__(self, other: GateMatrix) -> GateMatrix:
        return GateMatrix(self.matrix @ other.matrix, f"{self.name}.{other.name}")


_S2 = 1 / np.sqrt(2)
I = GateMatrix(np.eye(2), "I")
X = GateMatrix([[0, 1], [1, 0]], "X")
Y = GateMatrix([[0, -1j], [1j, 0]], "Y")
Z = GateMatrix([[1, 0], [0, -1]], "Z")
H = GateMatrix([[_S2, _S2], [_S2, -_S2]], "H")
T = GateMatrix([[1, 0], [0, np.exp(1j * np.pi / 4)]], "T")
TDG = GateMatrix([[1, 0], [0, np.exp(-1j * np.pi / 4)]], "TDG")
CNOT = GateMatrix(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]],
    "CNOT",
)

GATES: dict[str, GateMatrix] = {g.name: g for g in (I, X, Y, Z, H, T, TDG, CNOT)}


def gate_from_label(label: str) -> GateMatrix:
    """Resolve a gate label such as ``"H"`` or ``"H.T"`` (product, left acts last)."""
    try:
        parts = [GATES[p] for p in label.split(".")]
    except KeyError as exc:
        raise StateError(f"unknown gate label {label!r}") from exc
    m = parts[0].matrix
    for p in parts[1:]:
        m = m @ p.matrix
    return GateMatrix(m, label)


def make_basis_state(n: int, bits: str) -> StateVector:
    """Computational basis state; ``bits[q]`` is the value of qubit ``q``."""
    if n < 1:
        raise StateError("need at least one qubit")
    if len(bits) != n or set(bits) - {"0", "1"}:
        raise StateError(f"bitstring {bits!r} does not describe {n} qubits")
    index = sum(1 << q for q, b in enumerate(bits) if b == "1")
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[index] = 1.0
    return StateVector(amps)


def make_state(amplitudes: Sequence[complex] | np.ndarray) -> StateVector:
    """Wrap raw amplitudes; the norm must already be 1 (no renormalization)."""
    amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
    size = amps.size
    if size < 2 or size & (size - 1):
        raise StateError(f"amplitude count {size} is not a power of two >= 2")
    norm = np.linalg.norm(amps)
    if abs(norm - 1.0) > NORM_TOL:
        raise StateError(f"state norm {norm:.9g} is not 1")
    return StateVector(amps)


def _check_qubits(qubits: Sequence[int], n: int) -> None:
    if len(set(qubits)) != len(qubits):
        raise StateError(f"repeated qubit in {list(qubits)}")
    for q in qubits:
        if not 0 <= q < n:
            raise StateError(f"qubit {q} out of range for {n} qubits")


def apply_matrix(state: StateVector, matrix: np.ndarray, qubits: Sequence[int]) -> StateVector:
    """Apply an arbitrary ``2^k x 2^k`` operator; no unitarity or norm check."""
    n = state.num_qubits
    qubits = list(qubits)
    _check_qubits(qubits, n)
    k = len(qubits)
    if matrix.shape != (1 << k, 1 << k):
        raise StateError(f"operator of shape {matrix.shape} does not act on {k} qubits")
    if k == 1:
        # fast path: (high bits, qubit, low bits) with broadcasting matmul
        q = qubits[0]
        view = state.amplitudes.reshape(1 << (n - 1 - q), 2, 1 << q)
        return StateVector(np.matmul(matrix, view).reshape(-1))
    op = np.asarray(matrix).reshape((2,) * (2 * k))
    axes = [n - 1 - q for q in qubits]
    out = np.tensordot(op, state.tensor(), axes=(list(range(k, 2 * k)), axes))
    out = np.moveaxis(out, list(range(k)), axes)
    return StateVector(out.reshape(-1))


def apply_gate(state: StateVector, gate: GateMatrix, qubits: Sequence[int]) -> StateVector:
    if len(qubits) != gate.arity:
        raise StateError(f"gate {gate.name} acts on {gate.arity} qubit(s), got {list(qubits)}")
    return apply_matrix(state, gate.matrix, qubits)


def fidelity_mod_phase(s1: StateVector, s2: StateVector) -> float:
    """``|<s1|s2>|``, clipped to ``[0, 1]``."""
    if s1.num_qubits != s2.num_qubits:
        raise StateError(f"dimension mismatch: {s1.num_qubits} vs {s2.num_qubits} qubits")
    return float(min(1.0, abs(np.vdot(s1.amplitudes, s2.amplitudes))))


def align_phase(state: StateVector, reference: StateVector) -> StateVector:
    """Multiply ``state`` by the unit scalar that best matches ``reference``."""
    overlap = np.vdot(state.amplitudes, reference.amplitudes)
    if abs(overlap) < 1e-15:
        return state
    return StateVector(state.amplitudes * (overlap / abs(overlap)))


def kron(*states: StateVector) -> StateVector:
    """Tensor product; qubits of ``states[0]`` come first (lowest indices)."""
    amps = np.array([1.0], dtype=np.complex128)
    for s in states:
        amps = np.kron(s.amplitudes, amps)
    return StateVector(amps)


def permute_qubits(state: StateVector, order: Sequence[int]) -> StateVector:
    """Reorder qubits so that new qubit ``i`` is old qubit ``order[i]``."""
    n = state.num_qubits
    if sorted(order) != list(range(n)):
        raise StateError(f"{list(order)} is not a permutation of {n} qubits")
    # axis n-1-i of the new tensor is new qubit i
    src = [n - 1 - order[n - 1 - ax] for ax in range(n)]
    return StateVector(np.transpose(state.tensor(), src).reshape(-1))


def embed(parts: Sequence[tuple[Sequence[int], StateVector]], n: int) -> StateVector:
    """Build an ``n``-qubit product of ``(qubits, factor)`` parts.

    Qubits not mentioned start in ``|0>``.
    """
    placed: list[int] = []
    factors: list[StateVector] = []
    for qubits, factor in parts:
        if len(qubits) != factor.num_qubits:
            raise StateError("factor size does not match its qubit list")
        placed.extend(qubits)
        factors.append(factor)
    _check_qubits(placed, n)
    for q in range(n):
        if q not in placed:
            placed.append(q)
            factors.append(make_basis_state(1, "0"))
    combined = kron(*factors)
    # combined qubit i currently sits at physical position placed[i]
    order = [placed.index(q) for q in range(n)]
    return permute_qubits(combined, order)


def detach_qubits(state: StateVector, qubits: Sequence[int], expected: StateVector) -> StateVector:
    """Remove an unentangled factor on ``qubits`` that equals ``expected``.

    ``expected`` qubit ``i`` corresponds to ``qubits[i]``. The remaining
    qubits keep their relative order and are renumbered from 0.
    """
    n = state.num_qubits
    qubits = list(qubits)
    _check_qubits(qubits, n)
    k = len(qubits)
    if expected.num_qubits != k:
        raise StateError("expected factor size does not match qubit count")
    if k >= n:
        raise StateError("cannot detach every qubit")
    rest = [q for q in range(n) if q not in qubits]
    # new order: rest first (low), detached qubits last (high)
    moved = permute_qubits(state, rest + qubits)
    m = moved.amplitudes.reshape(1 << k, 1 << (n - k))
    sv = np.linalg.svd(m, compute_uv=False)
    if sv.size > 1 and sv[1] > DETACH_TOL:
        raise EntangledQubitError(f"qubits {qubits} are entangled (schmidt value {sv[1]:.3g})")
    remaining = expected.amplitudes.conj() @ m
    if abs(np.linalg.norm(remaining) - 1.0) > DETACH_TOL:
        raise MarginalMismatchError(
            f"qubits {qubits} are not in the expected state "
            f"(overlap {np.linalg.norm(remaining):.9g})"
        )
    return StateVector(remaining)


def detach_qubit(state: StateVector, q: int, expected: StateVector) -> StateVector:
    return detach_qubits(state, [q], expected)


def random_state(n: int, rng: np.random.Generator) -> StateVector:
    """Haar-random state from normalized complex Gaussian amplitudes."""
    amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return StateVector(amps / np.linalg.norm(amps))


def factor_state(state: StateVector, qubits: Sequence[int]) -> StateVector:
    """The pure factor held by ``qubits``; raises if they are entangled."""
    n = state.num_qubits
    qubits = list(qubits)
    _check_qubits(qubits, n)
    rest = [q for q in range(n) if q not in qubits]
    m = permute_qubits(state, rest + qubits).amplitudes.reshape(1 << len(qubits), -1)
    u, sv, _ = np.linalg.svd(m)
    if sv.size > 1 and sv[1] > DETACH_TOL:
        raise EntangledQubitError(f"qubits {qubits} are entangled (schmidt value {sv[1]:.3g})")
    return StateVector(u[:, 0])
