"""Standard single-mode operators.

Qubit basis ordering is (|0>, |1>) with sigma_z |0> = -|0> and
sigma_z |1> = +|1>, so sigma_+ = |1><0| raises and sigma_- = |0><1| decays
towards |0>. sigma_y is fixed by sigma_+- = (sigma_x +- i sigma_y) / 2.
"""

from __future__ import annotations

import numpy as np

SIGMA_Z = np.array([[-1, 0], [0, 1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
SIGMA_Y = -1j * (SIGMA_PLUS - SIGMA_MINUS)
IDENTITY_2 = np.eye(2, dtype=complex)


def destroy(n: int) -> np.ndarray:
    """Truncated annihilation operator, a|k> = sqrt(k)|k-1>."""
    if n < 1:
        raise ValueError("Fock cutoff must be positive")
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1).astype(complex)


def number(n: int) -> np.ndarray:
    return np.diag(np.arange(n, dtype=float)).astype(complex)


def ket(n: int, k: int) -> np.ndarray:
    v = np.zeros(n, dtype=complex)
    v[k] = 1.0
    return v


def projector(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def coherent(n: int, alpha: complex) -> np.ndarray:
    """Coherent state truncated to n Fock levels and renormalized."""
    k = np.arange(n)
    log_fact = np.array([np.sum(np.log(np.arange(1, j + 1))) for j in k])
    amps = np.exp(-0.5 * abs(alpha) ** 2 - 0.5 * log_fact) * np.power(complex(alpha), k)
    return amps / np.linalg.norm(amps)


def phi_plus() -> np.ndarray:
    return np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
