"""Exact 2x2 linear algebra for single-qubit states and propagators.

Unitaries are plain ``numpy`` arrays of shape ``(2, 2)`` and dtype
``complex128``; states are arrays of shape ``(2,)``. Rotations use the
convention ``exp(-i a/2 n.sigma)``.
"""
from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DomainError",
    "I2",
    "X",
    "Y",
    "Z",
    "KET0",
    "KET1",
    "pauli_axis_unitary",
    "rotation_vector",
    "fidelity",
    "infidelity",
    "apply",
    "unitarity_defect",
    "reunitarize",
    "basis_state",
    "bloch_vector",
    "pauli_action",
]

REUNITARIZE_THRESHOLD = 1e-10


class DomainError(ValueError):
    """Raised for non-finite or out-of-domain numerical inputs."""


def _frozen(a):
    a = np.asarray(a, dtype=np.complex128)
    a.setflags(write=False)
    return a


I2 = _frozen([[1, 0], [0, 1]])
X = _frozen([[0, 1], [1, 0]])
Y = _frozen([[0, -1j], [1j, 0]])
Z = _frozen([[1, 0], [0, -1]])
KET0 = _frozen([1, 0])
KET1 = _frozen([0, 1])


def pauli_axis_unitary(theta, axis):
    """Rotation ``cos(a/2) I - i sin(a/2) n.sigma`` with ``a = theta*|axis|``.

    The axis need not be normalized; its norm scales the rotation angle,
    so ``pauli_axis_unitary(theta, (cos phi, sin phi, delta))`` equals
    ``exp(-i theta/2 (sigma_phi + delta Z))``. A zero axis gives identity.
    """
    theta = float(theta)
    ax, ay, az = (float(c) for c in axis)
    if not all(math.isfinite(v) for v in (theta, ax, ay, az)):
        raise DomainError("non-finite rotation angle or axis")
    norm = math.sqrt(ax * ax + ay * ay + az * az)
    if norm == 0.0:
        return I2.copy()
    half = 0.5 * theta * norm
    c = math.cos(half)
    s = math.sin(half) / norm
    return np.array(
        [
            [complex(c, -s * az), complex(-s * ay, -s * ax)],
            [complex(s * ay, -s * ax), complex(c, s * az)],
        ]
    )


def _su2_params(U):
    # U = e^{i g} [[a, -b*], [b, a*]]; returns (a, b) of the SU(2) part.
    det = U[0, 0] * U[1, 1] - U[0, 1] * U[1, 0]
    ph = np.sqrt(det)
    return U[0, 0] / ph, U[1, 0] / ph, ph


def rotation_vector(U):
    """Return ``v`` with ``U = e^{i g} exp(-i v.sigma)``, ``|v| <= pi/2``.

    This is the Pauli decomposition of the matrix logarithm. The global
    phase is chosen so the rotation half-angle lies in ``[0, pi/2]``;
    ``-I`` is folded onto identity.
    """
    U = np.asarray(U, dtype=np.complex128)
    a, b, _ = _su2_params(U)
    if a.real < 0:
        a, b = -a, -b
    # exp(-i v.s) = cos|v| I - i sin|v| (n.s):  a = cos - i sin nz, b = sin (ny - i nx)
    sx, sy, sz = -b.imag, b.real, -a.imag
    s = math.sqrt(sx * sx + sy * sy + sz * sz)
    if s == 0.0:
        return np.zeros(3)
    half = math.atan2(s, a.real)
    return np.array([sx, sy, sz]) * (half / s)


def fidelity(U, V):
    """Gate fidelity ``|Tr(U^dagger V)|^2 / 4``, insensitive to global phase."""
    return float(abs(np.vdot(U, V)) ** 2 / 4.0)


def infidelity(U, V):
    """``1 - fidelity(U, V)`` evaluated without catastrophic cancellation.

    Writes ``U^dagger V`` as a global phase times ``[[a, -b*], [b, a*]]``;
    the infidelity is then ``Im(a)^2 + |b|^2``, which stays accurate far
    below machine epsilon.
    """
    E = np.conj(U).T @ V
    a, b, _ = _su2_params(E)
    return float(a.imag ** 2 + abs(b) ** 2)


def apply(U, state):
    """Apply ``U`` to a state vector, renormalizing if drift exceeds 1e-12."""
    out = np.asarray(U, dtype=np.complex128) @ np.asarray(state, dtype=np.complex128)
    norm2 = float(np.vdot(out, out).real)
    if abs(norm2 - 1.0) > 1e-12:
        out = out / math.sqrt(norm2)
    return out


def unitarity_defect(U):
    """Max-entry norm of ``U U^dagger - I``."""
    U = np.asarray(U)
    return float(np.max(np.abs(U @ np.conj(U).T - I2)))


def reunitarize(U, threshold=REUNITARIZE_THRESHOLD):
    """Gram-Schmidt the columns of ``U`` if its unitarity defect exceeds ``threshold``."""
    U = np.asarray(U, dtype=np.complex128)
    if unitarity_defect(U) <= threshold:
        return U
    c0 = U[:, 0] / np.linalg.norm(U[:, 0])
    c1 = U[:, 1] - np.vdot(c0, U[:, 1]) * c0
    c1 = c1 / np.linalg.norm(c1)
    return np.column_stack([c0, c1])


def basis_state(bit):
    return (KET0 if int(bit) == 0 else KET1).copy()


def bloch_vector(state):
    """Bloch vector ``(<X>, <Y>, <Z>)`` of a pure state."""
    c0, c1 = state
    return np.array(
        [2 * (np.conj(c0) * c1).real, 2 * (np.conj(c0) * c1).imag, abs(c0) ** 2 - abs(c1) ** 2]
    )


_PAULIS = (X, Y, Z)


def pauli_action(U):
    """3x3 real matrix ``R`` with ``U P_j U^dagger = sum_i R[i, j] P_i``.

    This is the SO(3) image of ``U``; it is free of global phase.
    """
    Ud = np.conj(U).T
    R = np.empty((3, 3))
    for j, Pj in enumerate(_PAULIS):
        M = U @ Pj @ Ud
        for i, Pi in enumerate(_PAULIS):
            R[i, j] = 0.5 * np.trace(Pi @ M).real
    return R
