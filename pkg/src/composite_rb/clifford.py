"""The 24 single-qubit Clifford gates as sequences of physical pulses."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .pulses import Pulse, PulseKind, ideal_unitary
from .su2 import fidelity, pauli_action

__all__ = [
    "CliffordGate",
    "CLIFFORD_LABELS",
    "clifford_table",
    "parse_token",
    "sample_indices",
    "sample_sequence",
    "inversion_gate",
    "sequence_ideal",
    "AuditResult",
    "audit_table",
]

HALF_PI = math.pi / 2

# Physical-gate decompositions; "A & B" applies A first.
CLIFFORD_LABELS: tuple[str, ...] = (
    "I", "X", "Y", "Z", "X/2", "Y/2", "Z/2", "-X/2", "-Y/2", "-Z/2",
    "Z & X/2", "X/2 & Z", "Z/2 & X", "X & Z/2", "Z/2 & X/2", "Y/2 & Z/2",
    "X/2 & -Z/2", "Y/2 & Z", "-X/2 & Z/2", "-Z/2 & Y/2", "Z & Y/2",
    "-Z/2 & X/2", "X/2 & Z/2", "-Y/2 & -Z/2",
)  # fmt: skip


def parse_token(token: str, z_as_drive: bool = False) -> tuple[Pulse, ...]:
    """Pulses for one physical gate such as ``"X/2"``, ``"-Y/2"`` or ``"Z"``.

    With ``z_as_drive`` a Z rotation by ``t`` is realized with drive pulses
    as ``X(pi/2) Y(t) X(-pi/2)`` (time order right to left).
    """
    token = token.strip()
    sign = -1.0 if token.startswith("-") else 1.0
    body = token.lstrip("-")
    axis, _, frac = body.partition("/")
    angle = math.pi / (int(frac) if frac else 1)
    if axis == "I":
        return ()
    if axis == "Z":
        if z_as_drive:
            return (
                Pulse(HALF_PI, math.pi),
                Pulse(sign * angle, HALF_PI).normalized(),
                Pulse(HALF_PI, 0.0),
            )
        return (Pulse(sign * angle, 0.0, PulseKind.FRAME),)
    phi = {"X": 0.0, "Y": HALF_PI}[axis]
    return (Pulse(sign * angle, phi).normalized(),)


@dataclass(frozen=True)
class CliffordGate:
    """One Clifford: 1-based ``index``, physical pulses in time order, ideal unitary."""

    index: int
    label: str
    decomposition: tuple[Pulse, ...]
    ideal: np.ndarray = field(compare=False, repr=False)


def _build(label: str, index: int, z_as_drive: bool) -> CliffordGate:
    pulses = tuple(p for tok in label.split("&") for p in parse_token(tok, z_as_drive))
    U = ideal_unitary(pulses)
    U.setflags(write=False)
    return CliffordGate(index, label, pulses, U)


@lru_cache(maxsize=None)
def clifford_table(z_as_drive: bool = False) -> tuple[CliffordGate, ...]:
    return tuple(_build(label, i + 1, z_as_drive) for i, label in enumerate(CLIFFORD_LABELS))


def sample_indices(L: int, rng: np.random.Generator) -> np.ndarray:
    """``L`` independent uniform draws of 1-based Clifford indices."""
    if L < 0:
        raise ValueError(f"sequence length must be >= 0, got {L}")
    return rng.integers(1, 25, size=L)


def sample_sequence(L: int, rng: np.random.Generator, z_as_drive: bool = False) -> list[CliffordGate]:
    table = clifford_table(z_as_drive)
    return [table[i - 1] for i in sample_indices(L, rng)]


def sequence_ideal(seq: Sequence[CliffordGate]) -> np.ndarray:
    U = np.eye(2, dtype=np.complex128)
    for g in seq:
        U = g.ideal @ U
    return U


def inversion_gate(
    seq: Sequence[CliffordGate], target: int, z_as_drive: bool = False, tol: float = 1e-10
) -> CliffordGate:
    """Lowest-index Clifford taking ``sequence_ideal(seq)|0>`` to ``|target>``."""
    state = sequence_ideal(seq)[:, 0]
    for g in clifford_table(z_as_drive):
        amp = g.ideal[target, :] @ state
        if abs(amp) ** 2 > 1 - tol:
            return g
    raise AssertionError("no inverting Clifford found; the table is not a group")


@dataclass
class AuditResult:
    index: int
    label: str
    passed: bool
    failures: list[str]

    def as_dict(self) -> dict:
        return {"index": self.index, "label": self.label, "passed": self.passed, "failures": self.failures}


def _signed_permutation(R: np.ndarray, tol: float) -> np.ndarray | None:
    S = np.rint(R)
    if np.max(np.abs(R - S)) > tol:
        return None
    if not (np.all(np.abs(S).sum(axis=0) == 1) and np.all(np.abs(S).sum(axis=1) == 1)):
        return None
    return S.astype(int)


def audit_table(gates: Sequence[CliffordGate], tol: float = 1e-10) -> list[AuditResult]:
    """Check each gate is a Clifford, distinct, decomposed correctly, and the set closes.

    Group membership is judged by the conjugation action on the Paulis,
    which ignores global phase: every gate must permute ``{+-X, +-Y, +-Z}``.
    """
    results = [AuditResult(g.index, g.label, True, []) for g in gates]
    actions: list[np.ndarray | None] = []
    for g, res in zip(gates, results):
        if fidelity(ideal_unitary(g.decomposition), g.ideal) < 1 - tol:
            res.failures.append("decomposition does not reproduce the stored ideal unitary")
        S = _signed_permutation(pauli_action(ideal_unitary(g.decomposition)), tol)
        if S is None:
            res.failures.append("does not permute the signed Pauli axes")
        actions.append(S)

    keys = {}
    for g, S, res in zip(gates, actions, results):
        if S is None:
            continue
        key = S.tobytes()
        if key in keys:
            res.failures.append(f"duplicates gate {keys[key]} up to global phase")
        else:
            keys[key] = g.index

    if len(gates) != 24:
        for res in results:
            res.failures.append(f"table has {len(gates)} gates, expected 24")
    if any(res.failures for res in results):
        # a broken gate removes its element from the set; closure failures of
        # the healthy gates would only echo that, so report the culprits alone
        for res in results:
            res.passed = not res.failures
        return results
    for g, Sa, res in zip(gates, actions, results):
        if Sa is None:
            continue
        for h, Sb in zip(gates, actions):
            if Sb is not None and (Sb @ Sa).tobytes() not in keys:
                res.failures.append(f"product with gate {h.index} leaves the set")
                break
        if (Sa.T).tobytes() not in keys:
            res.failures.append("inverse missing from the set")

    for res in results:
        res.passed = not res.failures
    return results
