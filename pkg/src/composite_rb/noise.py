"""Imperfect single-pulse propagators.

Two routes produce the propagator of one drive pulse:

* the closed-form tilted rotation ``exp[-i/2 theta(1+eps)(sigma_phi + delta Z)]``;
* the drive Hamiltonian with two off-resonant comb-pair terms, propagated
  by a second-order Magnus expansion whose integrals are done analytically.

A brute-force midpoint integrator serves as the reference for the second
route.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from . import kernels
from ._kernels_py import step_unitaries
from .pulses import Pulse
from .su2 import DomainError, pauli_axis_unitary, rotation_vector

__all__ = [
    "OffResonantDrive",
    "NoiseModel",
    "NoiseDraw",
    "DriveHamiltonian",
    "propagator_closed_form",
    "magnus2_propagator",
    "magnus_segments",
    "integrator_propagator",
    "effective_delta",
    "pulse_propagator",
    "DEFAULT_OMEGA",
]

DEFAULT_OMEGA = 2 * math.pi * 50e3
PHASE_RESAMPLING = ("sequence", "pulse", "fixed")

# Exponential moments use a power series for |w T| below this, else recursion.
_MOMENT_SERIES_CUTOFF = 2.0
_MOMENT_SERIES_TERMS = 40
# Triangle integrals Taylor-expand in the inner frequency below this |b T|.
_TRIANGLE_TAYLOR_CUTOFF = 1e-3
_TRIANGLE_TAYLOR_TERMS = 6

# Default Magnus slicing: radians of the fastest frame oscillation per segment.
MAGNUS_PHASE_STEP = 1.0



def _check_finite(**values):
    for name, v in values.items():
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class OffResonantDrive:
    """Off-resonant comb-pair drive terms at ``delta'`` and ``2 delta'``.

    Amplitudes are relative to the resonant Rabi frequency. ``resample``
    selects whether the engine redraws ``phi1``, ``phi2`` uniformly once
    per sequence, once per pulse, or keeps the fixed values given here.
    """

    amp1: float = 2.0
    amp2: float = 1.0
    delta_prime_ratio: float = 90.0
    phi1: float = 0.0
    phi2: float = 0.0
    resample: str = "sequence"

    def __post_init__(self):
        _check_finite(
            amp1=self.amp1,
            amp2=self.amp2,
            delta_prime_ratio=self.delta_prime_ratio,
            phi1=self.phi1,
            phi2=self.phi2,
        )
        if self.delta_prime_ratio == 0 and (self.amp1 or self.amp2):
            raise DomainError("off-resonant detuning must be nonzero")
        if self.resample not in PHASE_RESAMPLING:
            raise ValueError(f"resample must be one of {PHASE_RESAMPLING}, got {self.resample!r}")


@dataclass(frozen=True)
class NoiseModel:
    """Error parameters for every drive pulse.

    ``epsilon`` is the fractional pulse-area error; ``delta_max`` bounds the
    uniform per-sequence draw of the axis tilt (detuning over Rabi
    frequency). ``omega`` is the Rabi frequency in rad/s and only sets the
    time scale of the Hamiltonian route.
    """

    epsilon: float = 0.0
    delta_max: float = 0.0
    offres: OffResonantDrive | None = None
    omega: float = DEFAULT_OMEGA

    def __post_init__(self):
        _check_finite(epsilon=self.epsilon, delta_max=self.delta_max, omega=self.omega)
        if self.epsilon <= -1:
            raise DomainError(f"epsilon must exceed -1, got {self.epsilon}")
        if self.delta_max < 0:
            raise DomainError(f"delta_max must be >= 0, got {self.delta_max}")
        if self.omega <= 0:
            raise DomainError(f"omega must be positive, got {self.omega}")

    def with_epsilon(self, epsilon: float) -> "NoiseModel":
        return replace(self, epsilon=epsilon)


@dataclass(frozen=True)
class NoiseDraw:
    """One realization of the random noise parameters."""

    delta: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0


@dataclass(frozen=True)
class DriveHamiltonian:
    """``H(t) = Omega/2 {sigma_phi + delta Z + a1 sigma(delta' t + phi1) + a2 sigma(2 delta' t + phi2)}``.

    ``sigma(x)`` stands for ``X cos x + Y sin x``. ``omega`` and
    ``delta_prime`` are in rad/s, ``duration`` in seconds.
    """

    omega: float
    phi: float
    duration: float
    delta: float = 0.0
    amp1: float = 0.0
    amp2: float = 0.0
    delta_prime: float = 0.0
    phi1: float = 0.0
    phi2: float = 0.0

    def __post_init__(self):
        _check_finite(**{k: getattr(self, k) for k in self.__dataclass_fields__})
        if self.duration < 0:
            raise DomainError("duration must be non-negative")

    @classmethod
    def for_pulse(cls, pulse: Pulse, model: NoiseModel, draw: NoiseDraw = NoiseDraw()):
        """Hamiltonian realizing a drive pulse; timing error stretches the duration."""
        pulse = pulse.normalized()
        off = model.offres
        return cls(
            omega=model.omega,
            phi=pulse.phi,
            duration=pulse.theta * (1.0 + model.epsilon) / model.omega,
            delta=draw.delta,
            amp1=off.amp1 if off else 0.0,
            amp2=off.amp2 if off else 0.0,
            delta_prime=off.delta_prime_ratio * model.omega if off else 0.0,
            phi1=draw.phi1,
            phi2=draw.phi2,
        )

    @property
    def has_offres(self) -> bool:
        return bool(self.amp1 or self.amp2)

    def drive_terms(self):
        """``(amps, freqs, phases, hz)`` for the rotating-field kernels."""
        half = 0.5 * self.omega
        amps = np.array([half, half * self.amp1, half * self.amp2])
        freqs = np.array([0.0, self.delta_prime, 2.0 * self.delta_prime])
        phases = np.array([self.phi, self.phi1, self.phi2])
        return amps, freqs, phases, half * self.delta

    def resonant_unitary(self, t: float) -> np.ndarray:
        axis = (math.cos(self.phi), math.sin(self.phi), self.delta)
        return pauli_axis_unitary(self.omega * t, axis)


def propagator_closed_form(pulse: Pulse, model: NoiseModel, delta_draw: float = 0.0) -> np.ndarray:
    """Tilted, area-scaled rotation ``exp[-i/2 theta(1+eps)(sigma_phi + delta Z)]``.

    Frame updates are exact Z rotations; no error is applied to them.
    """
    if not pulse.is_drive:
        return pulse.ideal()
    p = pulse.normalized()
    axis = (math.cos(p.phi), math.sin(p.phi), float(delta_draw))
    return pauli_axis_unitary(p.theta * (1.0 + model.epsilon), axis)


# --- analytic exponential integrals ---------------------------------------
#
# moment(n, w) = int_0^T t^n e^{iwt} dt
# triangle(a, b) = int_0^T e^{ia t1} int_0^t1 e^{ib t2} dt2 dt1


def _moment(n: int, w: float, T: float) -> complex:
    x = w * T
    if abs(x) < _MOMENT_SERIES_CUTOFF:
        total = 0j
        term = 1.0 + 0j
        for k in range(_MOMENT_SERIES_TERMS):
            total += term / (n + k + 1)
            term *= 1j * x / (k + 1)
        return T ** (n + 1) * total
    e = cmath.exp(1j * x)
    m = (e - 1.0) / (1j * w)
    for j in range(1, n + 1):
        m = (T**j * e - j * m) / (1j * w)
    return m


def _triangle(a: float, b: float, T: float) -> complex:
    if abs(b * T) < _TRIANGLE_TAYLOR_CUTOFF:
        # inner integral = sum_k (ib)^k t1^(k+1) / (k+1)!
        return sum(
            (1j * b) ** k / math.factorial(k + 1) * _moment(k + 1, a, T)
            for k in range(_TRIANGLE_TAYLOR_TERMS)
        )
    return (_moment(0, a + b, T) - _moment(0, a, T)) / (1j * b)


def _interaction_components(h: DriveHamiltonian):
    """Off-resonant terms in the frame of the resonant drive.

    Returns complex vectors ``G`` (m, 3) and frequencies ``w`` (m,) with
    ``V_I(t) = Re sum_j G_j e^{i w_j t} . sigma``.
    """
    h0 = 0.5 * h.omega * np.array([math.cos(h.phi), math.sin(h.phi), h.delta])
    rate = 2.0 * float(np.linalg.norm(h0))
    n = h0 / np.linalg.norm(h0)
    G, w = [], []
    for amp, freq, psi in (
        (h.amp1, h.delta_prime, h.phi1),
        (h.amp2, 2.0 * h.delta_prime, h.phi2),
    ):
        if amp == 0:
            continue
        g = 0.5 * h.omega * amp * cmath.exp(1j * psi) * np.array([1.0, -1j, 0.0])
        par = n * (n @ g)
        perp = g - par
        cross = np.cross(n, g)
        G += [par, 0.5 * (perp + 1j * cross), 0.5 * (perp - 1j * cross)]
        w += [freq, freq + rate, freq - rate]
    return np.array(G, dtype=complex).reshape(-1, 3), np.array(w, dtype=float)


@lru_cache(maxsize=256)
def _integral_tables(w: tuple[float, ...], tau: float):
    m = len(w)
    first = np.array([_moment(0, wj, tau) for wj in w])
    same = np.empty((m, m), dtype=complex)
    flip = np.empty((m, m), dtype=complex)
    for j in range(m):
        for k in range(m):
            same[j, k] = _triangle(w[j], w[k], tau)
            flip[j, k] = _triangle(w[j], -w[k], tau)
    for arr in (first, same, flip):
        arr.setflags(write=False)
    return first, same, flip


def _magnus_vectors(G, w, tau, n):
    """Rotation vectors ``v_k`` with ``exp(Omega1 + Omega2) = exp(-i v_k.sigma)``
    on ``n`` consecutive segments of length ``tau``.

    Shifting a segment's start to ``t0`` multiplies each ``G_j`` by
    ``exp(i w_j t0)``, so the integrals below are shared by all segments.
    """
    first, same, flip = _integral_tables(tuple(float(x) for x in w), float(tau))
    Gs = G[None, :, :] * np.exp(1j * np.outer(tau * np.arange(n), w))[:, :, None]
    Gt = Gs.transpose(0, 2, 1)
    v1 = (Gt @ first).real
    # I_ab = int int_{t2<t1} v_a(t1) v_b(t2), using Re(x)Re(y) = Re(xy + x y*)/2;
    # only its antisymmetric part enters the commutator term
    I = 0.5 * (Gt @ same @ Gs + Gt @ flip @ Gs.conj()).real
    v2 = np.stack([I[:, 1, 2] - I[:, 2, 1], I[:, 2, 0] - I[:, 0, 2], I[:, 0, 1] - I[:, 1, 0]], axis=1)
    return v1 + v2


def magnus_segments(h: DriveHamiltonian) -> int:
    """Default slicing: every segment spans at most ``MAGNUS_PHASE_STEP`` radians
    of the fastest interaction-frame oscillation."""
    if not h.has_offres or h.duration == 0:
        return 1
    _, w = _interaction_components(h)
    return max(1, math.ceil(float(np.max(np.abs(w))) * h.duration / MAGNUS_PHASE_STEP))


def magnus2_propagator(h: DriveHamiltonian, segments: int | None = None) -> np.ndarray:
    """Second-order Magnus propagator of the drive Hamiltonian.

    The expansion is taken in the interaction frame of the resonant term
    ``U0(t) = exp(-i t Omega/2 (sigma_phi + delta Z))``. ``Omega1`` and
    ``Omega2`` are integrated in closed form on each of ``segments`` equal
    slices of the pulse and the slice exponentials are multiplied in time
    order; the result is ``U0(T) prod_k exp(Omega1_k + Omega2_k)``.
    ``segments=1`` is the single expansion over the whole pulse, whose
    truncation error grows like ``(a Omega)^3 T / delta'^2``; the default
    (:func:`magnus_segments`) slices finely enough that the neglected
    third-order terms drop below 1e-6 in the regime ``delta' >> Omega``.
    """
    if h.duration == 0:
        return np.eye(2, dtype=np.complex128)
    U0 = h.resonant_unitary(h.duration)
    if not h.has_offres:
        return U0
    if h.delta_prime == 0:
        raise DomainError("off-resonant detuning must be nonzero")
    n = magnus_segments(h) if segments is None else int(segments)
    if n < 1:
        raise ValueError(f"segments must be >= 1, got {segments}")
    G, w = _interaction_components(h)
    v = _magnus_vectors(G, w, h.duration / n, n)
    steps = step_unitaries(v[:, 0], v[:, 1], v[:, 2])
    UI = kernels.chain_product(steps, np.arange(n, dtype=np.intp))
    return U0 @ UI


def integrator_propagator(h: DriveHamiltonian, steps: int = 100_000) -> np.ndarray:
    """Time-ordered product of midpoint steps ``exp(-i H(t_k) dt)``; error is O(dt^2)."""
    if steps < 1000:
        raise ValueError(f"integrator needs at least 1000 steps, got {steps}")
    if h.duration == 0:
        return np.eye(2, dtype=np.complex128)
    amps, freqs, phases, hz = h.drive_terms()
    return kernels.drive_product(amps, freqs, phases, hz, h.duration, int(steps))


def effective_delta(h: DriveHamiltonian) -> float:
    """Effective axis tilt (Z over in-plane component) of the Magnus propagator.

    The sign of the rotation vector is ambiguous for rotations near pi, so
    the in-plane part is signed by its projection on the drive axis.
    """
    v = rotation_vector(magnus2_propagator(h))
    norm = float(np.linalg.norm(v))
    if norm < 1e-12:
        raise DomainError("propagator is within 1e-12 of +-I; rotation axis undefined")
    c, s = math.cos(h.phi), math.sin(h.phi)
    # remove the drive-phase frame: rotate about Z by -phi
    vx, vy = c * v[0] + s * v[1], -s * v[0] + c * v[1]
    inplane = math.hypot(vx, vy)
    if inplane < 1e-15 * norm:
        raise DomainError("rotation axis is along Z; tilt undefined")
    # signing by the drive-axis component cancels the sign fold of v
    return float(v[2]) / math.copysign(inplane, vx)


def pulse_propagator(pulse: Pulse, model: NoiseModel, draw: NoiseDraw = NoiseDraw()) -> np.ndarray:
    """Noisy propagator of one pulse: closed form, or Magnus when off-resonant terms are on."""
    if not pulse.is_drive:
        return pulse.ideal()
    if model.offres is None:
        return propagator_closed_form(pulse, model, draw.delta)
    return magnus2_propagator(DriveHamiltonian.for_pulse(pulse, model, draw))
