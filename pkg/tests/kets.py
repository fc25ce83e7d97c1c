"""Small state-building helpers shared by the test modules."""

import numpy as np

from statetransfer.statevec import StateVector, apply_matrix, kron

S2 = 1 / np.sqrt(2)
_KETS = {"0": [1, 0], "1": [0, 1], "+": [S2, S2], "-": [S2, -S2]}

PX = np.array([[0, 1], [1, 0]], dtype=complex)
PZ = np.array([[1, 0], [0, -1]], dtype=complex)
EYE = np.eye(2, dtype=complex)


def ket(label: str) -> np.ndarray:
    """Product ket amplitudes; ``label[i]`` is the state of qubit ``i``."""
    return kron(*(StateVector(_KETS[c]) for c in label)).amplitudes


def sv(amps) -> StateVector:
    return StateVector(np.asarray(amps, dtype=complex))


def bit(*outcomes: int) -> int:
    """``(1 - product) / 2``."""
    return (1 - int(np.prod(outcomes))) // 2


def xpow(e: int) -> np.ndarray:
    return PX if e else EYE


def zpow(e: int) -> np.ndarray:
    return PZ if e else EYE


def decorate(ops, amps) -> np.ndarray:
    """Apply ``ops[q]`` to qubit ``q``."""
    st = sv(amps)
    for q, m in enumerate(ops):
        st = apply_matrix(st, m, [q])
    return st.amplitudes


def phase_aligned_close(a: np.ndarray, b: np.ndarray, atol: float) -> bool:
    """Entrywise comparison after removing the relative global phase."""
    overlap = np.vdot(a, b)
    if abs(overlap) < 1e-15:
        return False
    return bool(np.allclose(a * overlap / abs(overlap), b, atol=atol, rtol=0))


def unitary_from_seed(seed: int, dim: int = 2) -> np.ndarray:
    g = np.random.default_rng(seed)
    m = g.standard_normal((dim, dim)) + 1j * g.standard_normal((dim, dim))
    q, r = np.linalg.qr(m)
    return q * (np.diag(r) / np.abs(np.diag(r)))
