"""Target rotations and their composite-pulse expansions (primitive, B2, PD6)."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .su2 import DomainError, I2, pauli_axis_unitary

__all__ = [
    "PulseKind",
    "Pulse",
    "Scheme",
    "UnsupportedTargetError",
    "PD6_PHASES",
    "b2_phase",
    "pd6_table",
    "expand",
    "total_angle",
    "ideal_unitary",
    "sequence_unitary",
]

TWO_PI = 2.0 * math.pi

# Correction-pulse phases (relative to the target phase), keyed by target angle.
PD6_PHASES: Mapping[float, tuple[float, ...]] = {
    math.pi: (0.38266, -2.51430, -1.75192, 0.05941, 2.67572, 0.39344),
    math.pi / 2: (0.34769, -3.06979, 1.55852, -0.70890, 3.09692, -0.62174),
}

_ANGLE_MATCH_TOL = 1e-9


class UnsupportedTargetError(ValueError):
    """No phase table exists for the requested target angle."""


class PulseKind(str, enum.Enum):
    DRIVE = "drive"
    FRAME = "frame"


class Scheme(str, enum.Enum):
    PRIMITIVE = "primitive"
    B2 = "b2"
    PD6 = "pd6"


@dataclass(frozen=True)
class Pulse:
    """A rotation ``R(theta, phi)``.

    Drive pulses rotate about ``cos(phi) X + sin(phi) Y``. Frame updates
    are zero-duration Z rotations by ``theta``; their ``phi`` is unused.
    """

    theta: float
    phi: float = 0.0
    kind: PulseKind = PulseKind.DRIVE

    @property
    def is_drive(self) -> bool:
        return self.kind is PulseKind.DRIVE

    def normalized(self) -> "Pulse":
        """Drive pulses with ``theta < 0`` become ``(-theta, phi + pi)``."""
        if self.is_drive and self.theta < 0:
            return Pulse(-self.theta, math.fmod(self.phi + math.pi, TWO_PI), self.kind)
        return self

    def ideal(self) -> np.ndarray:
        if self.is_drive:
            return pauli_axis_unitary(self.theta, (math.cos(self.phi), math.sin(self.phi), 0.0))
        return pauli_axis_unitary(self.theta, (0.0, 0.0, 1.0))


def b2_phase(theta_t: float) -> float:
    """B2 (BB1) correction phase ``arccos(-theta_t / 4 pi)``."""
    theta_t = float(theta_t)
    if not math.isfinite(theta_t) or abs(theta_t) > 4 * math.pi:
        raise DomainError(f"B2 phase undefined for theta_t={theta_t!r}; need |theta_t| <= 4 pi")
    return math.acos(-theta_t / (4 * math.pi))


def pd6_table(theta_t: float, table: Mapping[float, Sequence[float]] | None = None) -> list[float]:
    """The six PD6 correction phases for ``theta_t``."""
    table = PD6_PHASES if table is None else table
    for key, phases in table.items():
        if abs(float(key) - theta_t) < _ANGLE_MATCH_TOL:
            return list(phases)
    raise UnsupportedTargetError(
        f"no PD6 phase table for theta_t={theta_t!r} (available: {sorted(table)})"
    )


def expand(
    target: Pulse,
    scheme: Scheme | str,
    phase_table: Mapping[float, Sequence[float]] | None = None,
) -> tuple[Pulse, ...]:
    """Replace ``target`` by its compensated pulse sequence, in time order.

    The correction block precedes the target pulse: operator products are
    read right to left, so the rightmost factor acts first. Frame updates
    are passed through unchanged. ``phase_table`` overrides the PD6 table
    and may carry entries for further target angles.
    """
    scheme = Scheme(scheme)
    if not target.is_drive:
        return (target,)
    target = target.normalized()
    theta, phi = target.theta, target.phi
    if scheme is Scheme.PRIMITIVE:
        return (target,)
    if scheme is Scheme.B2:
        fb = b2_phase(theta)
        return (
            Pulse(math.pi, phi + fb),
            Pulse(2 * math.pi, phi + 3 * fb),
            Pulse(math.pi, phi + fb),
            target,
        )
    phases = pd6_table(theta, phase_table)
    block = [Pulse(math.pi, phi + f) for f in phases + phases[::-1]]
    return (*block, target)


def total_angle(seq: Sequence[Pulse]) -> float:
    """Sum of drive rotation angles; frame updates take no drive time."""
    return math.fsum(p.theta for p in seq if p.is_drive)


def sequence_unitary(unitaries) -> np.ndarray:
    """Product of per-pulse unitaries given in time order."""
    U = I2.copy()
    for M in unitaries:
        U = M @ U
    return U


def ideal_unitary(seq: Sequence[Pulse]) -> np.ndarray:
    return sequence_unitary(p.ideal() for p in seq)
