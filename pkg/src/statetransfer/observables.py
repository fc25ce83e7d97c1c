"""One- and two-qubit two-outcome observables and projective measurement.

Observable text tokens are ``AXIS@q`` for one qubit and
``AXIS@q*AXIS@q`` for two, with axes ``X``, ``Y``, ``Z``, ``X+Y`` and
``X-Y``. The last two stand for ``(X+Y)/sqrt(2)`` and ``(X-Y)/sqrt(2)``.
"""

from __future__ import annotations

import enum
import functools
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .statevec import StateError, StateVector, apply_matrix

ZERO_PROB = 1e-12


class Axis(enum.Enum):
    X = "X"
    Y = "Y"
    Z = "Z"
    XPLUSY = "X+Y"
    XMINUSY = "X-Y"

    @property
    def matrix(self) -> np.ndarray:
        return _AXIS_MATRICES[self]

    @property
    def token(self) -> str:
        return self.value

    @classmethod
    def from_token(cls, token: str) -> Axis:
        try:
            return cls(token)
        except ValueError:
            raise ObservableError(f"unknown axis {token!r}") from None


_s2 = 1 / np.sqrt(2)
_PX = np.array([[0, 1], [1, 0]], dtype=np.complex128)
_PY = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
_PZ = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_AXIS_MATRICES = {
    Axis.X: _PX,
    Axis.Y: _PY,
    Axis.Z: _PZ,
    Axis.XPLUSY: (_PX + _PY) * _s2,
    Axis.XMINUSY: (_PX - _PY) * _s2,
}
for _m in _AXIS_MATRICES.values():
    _m.setflags(write=False)

# Order used when normalizing two-qubit tokens for reports ("Z*X", not "X*Z").
AXIS_ORDER = (Axis.Z, Axis.X, Axis.Y, Axis.XPLUSY, Axis.XMINUSY)


class ObservableError(ValueError):
    """Malformed observable or token."""


class ImpossibleBranchError(StateError):
    """A forced outcome has (numerically) zero probability."""


def identify_axis(matrix: np.ndarray, tol: float = 1e-9) -> tuple[int, Axis] | None:
    """Return ``(sign, axis)`` with ``matrix == sign * axis.matrix``, if any."""
    for axis, m in _AXIS_MATRICES.items():
        for sign in (1, -1):
            if np.max(np.abs(matrix - sign * m)) <= tol:
                return sign, axis
    return None


@dataclass(frozen=True)
class Observable:
    """Tensor product of one or two axes on distinct qubits."""

    terms: tuple[tuple[int, Axis], ...]

    def __post_init__(self) -> None:
        terms = tuple((int(q), Axis(a)) for q, a in self.terms)
        if not 1 <= len(terms) <= 2:
            raise ObservableError("observables act on one or two qubits")
        qubits = [q for q, _ in terms]
        if len(set(qubits)) != len(qubits):
            raise ObservableError(f"repeated qubit in observable {terms}")
        if any(q < 0 for q in qubits):
            raise ObservableError("negative qubit index")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def single(cls, axis: Axis, q: int) -> Observable:
        return cls(((q, axis),))

    @classmethod
    def pair(cls, a1: Axis, q1: int, a2: Axis, q2: int) -> Observable:
        return cls(((q1, a1), (q2, a2)))

    @classmethod
    def parse(cls, token: str) -> Observable:
        terms = []
        for part in token.split("*"):
            axis, sep, q = part.partition("@")
            if not sep or not q.isdigit():
                raise ObservableError(f"bad observable token {token!r}")
            terms.append((int(q), Axis.from_token(axis)))
        return cls(tuple(terms))

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.terms)

    @property
    def token(self) -> str:
        return "*".join(f"{a.token}@{q}" for q, a in self.terms)

    @property
    def shape_token(self) -> str:
        """Qubit-free token with axes in canonical order, e.g. ``Z*X``."""
        axes = sorted((a for _, a in self.terms), key=AXIS_ORDER.index)
        return "*".join(a.token for a in axes)

    def relabel(self, mapping: dict[int, int]) -> Observable:
        return Observable(tuple((mapping.get(q, q), a) for q, a in self.terms))

    def __str__(self) -> str:
        return self.token


def observable_matrix(obs: Observable, n: int) -> np.ndarray:
    """Full ``2^n x 2^n`` operator (qubit 0 = least significant bit)."""
    for q in obs.qubits:
        if not 0 <= q < n:
            raise ObservableError(f"qubit {q} out of range for {n} qubits")
    axes = dict(obs.terms)
    out = np.array([[1.0]], dtype=np.complex128)
    for q in reversed(range(n)):
        out = np.kron(out, axes[q].matrix if q in axes else np.eye(2))
    return out


def eigenprojectors(obs: Observable, n: int) -> tuple[np.ndarray, np.ndarray]:
    o = observable_matrix(obs, n)
    eye = np.eye(1 << n)
    return (eye + o) / 2, (eye - o) / 2


def apply_observable(state: StateVector, obs: Observable) -> np.ndarray:
    """Amplitudes of ``O|state>`` without building the full operator."""
    for q in obs.qubits:
        if q >= state.num_qubits:
            raise ObservableError(f"qubit {q} out of range for {state.num_qubits} qubits")
    out = state
    for q, axis in obs.terms:
        out = apply_matrix(out, axis.matrix, [q])
    return out.amplitudes


def _branches(state: StateVector, obs: Observable) -> tuple[np.ndarray, np.ndarray]:
    o_psi = apply_observable(state, obs)
    return (state.amplitudes + o_psi) / 2, (state.amplitudes - o_psi) / 2


def born_probabilities(state: StateVector, obs: Observable) -> tuple[float, float]:
    plus, minus = _branches(state, obs)
    return float(np.vdot(plus, plus).real), float(np.vdot(minus, minus).real)


class DrawSource(Protocol):
    def random(self) -> float: ...


def measure(
    state: StateVector, obs: Observable, rng: DrawSource
) -> tuple[int, StateVector, float]:
    """Sample a projective measurement.

    One uniform draw is consumed; the outcome is +1 iff the draw is below
    the +1 probability. Returns ``(outcome, post_state, probability)``.
    """
    plus, minus = _branches(state, obs)
    p_plus = float(np.vdot(plus, plus).real)
    p_minus = float(np.vdot(minus, minus).real)
    if p_plus < ZERO_PROB and p_minus < ZERO_PROB:
        raise StateError("both outcomes have zero probability; state is corrupt")
    draw = rng.random()
    if draw < p_plus:
        return 1, StateVector(plus / np.sqrt(p_plus)), p_plus
    return -1, StateVector(minus / np.sqrt(p_minus)), p_minus


def force_outcome(state: StateVector, obs: Observable, want: int) -> tuple[StateVector, float]:
    if want not in (1, -1):
        raise ObservableError(f"outcome must be +1 or -1, got {want!r}")
    plus, minus = _branches(state, obs)
    branch = plus if want == 1 else minus
    p = float(np.vdot(branch, branch).real)
    if p < ZERO_PROB:
        raise ImpossibleBranchError(f"outcome {want:+d} of {obs.token} has zero probability")
    return StateVector(branch / np.sqrt(p)), p


def common_eigenstate(
    observables: Sequence[Observable], outcomes: Sequence[int], qubits: Sequence[int]
) -> StateVector:
    """The joint eigenvector of commuting observables restricted to ``qubits``.

    Qubit ``i`` of the result is ``qubits[i]``. The observables must pin
    down a single state on those qubits.
    """
    return _common_eigenstate(tuple(observables), tuple(outcomes), tuple(qubits))


@functools.lru_cache(maxsize=1024)
def _common_eigenstate(
    observables: tuple[Observable, ...], outcomes: tuple[int, ...], qubits: tuple[int, ...]
) -> StateVector:
    local = {q: i for i, q in enumerate(qubits)}
    k = len(qubits)
    proj = np.eye(1 << k, dtype=np.complex128)
    for obs, r in zip(observables, outcomes):
        o = observable_matrix(obs.relabel(local), k)
        proj = proj @ ((np.eye(1 << k) + r * o) / 2)
    if np.linalg.matrix_rank(proj, tol=1e-9) != 1:
        raise ObservableError(f"observables do not fix a unique state on qubits {qubits}")
    col = proj[:, int(np.argmax(np.linalg.norm(proj, axis=0)))]
    return StateVector(col / np.linalg.norm(col))
