"""Reference computations that share no code with the package."""
from __future__ import annotations

import math

import numpy as np

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
ID = np.eye(2, dtype=complex)


def expm_taylor(A, order: int = 4, target: float = 1e-4) -> np.ndarray:
    """Matrix exponential by scaling, a truncated Taylor series, and squaring."""
    A = np.asarray(A, dtype=complex)
    norm = np.abs(A).sum(axis=1).max()
    s = max(0, math.ceil(math.log2(norm / target))) if norm > 0 else 0
    B = A / 2**s
    E = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for k in range(1, order + 1):
        term = term @ B / k
        E = E + term
    for _ in range(s):
        E = E @ E
    return E


def rotation(theta, axis) -> np.ndarray:
    """``exp(-i theta/2 axis.sigma)`` through the series oracle."""
    ax, ay, az = axis
    return expm_taylor(-0.5j * theta * (ax * SX + ay * SY + az * SZ))


def time_ordered(hamiltonian, T, steps):
    """Brute-force midpoint product of ``expm(-i H dt)`` with the series oracle."""
    dt = T / steps
    U = ID.copy()
    for k in range(steps):
        U = expm_taylor(-1j * hamiltonian((k + 0.5) * dt) * dt, order=6, target=1e-2) @ U
    return U


def max_entry(A) -> float:
    return float(np.max(np.abs(np.asarray(A))))


def phase_aligned_distance(U, V) -> float:
    """Max-entry distance after removing the relative global phase."""
    ph = np.vdot(U, V)
    ph = ph / abs(ph) if abs(ph) > 0 else 1.0
    return max_entry(U * ph - V)


def gate_fidelity(U, V) -> float:
    return abs(np.trace(U.conj().T @ V)) ** 2 / 4
