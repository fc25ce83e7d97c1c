"""Closed-form intermediate states of the transfer and CNOT patterns.

Each function takes the symbolic amplitudes and the outcomes forced so far
and returns the expected register after that measurement, with the Pauli
decorations written out explicitly. The CNOT auxiliary ``c`` starts in
``|+>``; the transfer auxiliary ``b`` starts in ``|0>``.
"""

import numpy as np
from kets import EYE, S2, bit, decorate, ket, xpow, zpow


def transfer_states(alpha, beta, j, k, l):
    """``[psi1, psi2, psi3]`` on qubits ``(a, b)``."""
    psi1 = S2 * decorate(
        [EYE, zpow(bit(j))],
        alpha * ket("00") + alpha * ket("01") + beta * ket("10") + beta * ket("11"),
    )
    psi2 = decorate([zpow(bit(j)), xpow(bit(k))], alpha * ket("00") + beta * ket("11"))
    phi = np.array([alpha, beta])
    psi3 = decorate(
        [zpow(bit(l)), zpow(bit(j, l)) @ xpow(bit(k))],
        np.kron(phi, ket("+")),
    )
    return [psi1, psi2, psi3]


def cnot_states(alpha, beta, gamma, delta, j, k, l, m):
    """``[psi1, psi2, psi3, psi4]`` on qubits ``(a, b, c)``."""
    psi1 = decorate(
        [EYE, EYE, xpow(bit(j))],
        alpha * ket("000") + beta * ket("010") + gamma * ket("100") + delta * ket("110"),
    )
    psi2 = decorate(
        [zpow(bit(j)), EYE, zpow(bit(k))],
        alpha * ket("00+") + beta * ket("01+") + gamma * ket("10-") + delta * ket("11-"),
    )
    psi3 = S2 * decorate(
        [zpow(bit(j, l)), xpow(bit(k)), xpow(bit(l))],
        alpha * (ket("00+") + ket("01-"))
        + beta * (ket("01+") + ket("00-"))
        + gamma * (ket("10-") + ket("11+"))
        + delta * (ket("11-") + ket("10+")),
    )
    logical = alpha * ket("00") + beta * ket("01") + gamma * ket("11") + delta * ket("10")
    psi4 = decorate(
        [zpow(bit(j, l)), xpow(bit(k, m)), zpow(bit(m))],
        np.kron(ket("+"), logical),
    )
    return [psi1, psi2, psi3, psi4]
