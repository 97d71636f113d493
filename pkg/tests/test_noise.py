import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from _oracles import SX, SY, SZ, expm_taylor, gate_fidelity, max_entry, rotation, time_ordered
from composite_rb import noise
from composite_rb.noise import (
    DEFAULT_OMEGA,
    DriveHamiltonian,
    NoiseDraw,
    NoiseModel,
    OffResonantDrive,
    effective_delta,
    integrator_propagator,
    magnus2_propagator,
    magnus_segments,
    propagator_closed_form,
    pulse_propagator,
)
from composite_rb.pulses import Pulse, PulseKind
from composite_rb.su2 import DomainError, Z, rotation_vector, unitarity_defect

PI = math.pi
OMEGA = 2 * PI * 50e3
MINUS_I_X = np.array([[0, -1j], [-1j, 0]])


def drive(ratio=90.0, theta=PI, phi=0.0, phi1=0.0, phi2=0.0, amp1=2.0, amp2=1.0, delta=0.0):
    return DriveHamiltonian(
        omega=OMEGA, phi=phi, duration=theta / OMEGA, delta=delta, amp1=amp1, amp2=amp2,
        delta_prime=ratio * OMEGA, phi1=phi1, phi2=phi2,
    )  # fmt: skip


def lab_hamiltonian(h):
    """``H(t)`` written out directly from its definition, for the oracle."""

    def sig(x):
        return math.cos(x) * SX + math.sin(x) * SY

    def H(t):
        return 0.5 * h.omega * (
            sig(h.phi) + h.delta * SZ
            + h.amp1 * sig(h.delta_prime * t + h.phi1)
            + h.amp2 * sig(2 * h.delta_prime * t + h.phi2)
        )  # fmt: skip

    return H


# --- model validation ----------------------------------------------------------


@pytest.mark.parametrize("kwargs", [{"epsilon": -1.0}, {"epsilon": -2.0}, {"delta_max": -0.1}, {"epsilon": math.nan}, {"omega": 0.0}])
def test_noise_model_rejects(kwargs):
    with pytest.raises(ValueError):
        NoiseModel(**kwargs)


def test_offres_rejects_bad_settings():
    with pytest.raises(ValueError):
        OffResonantDrive(resample="hourly")
    with pytest.raises(DomainError):
        OffResonantDrive(delta_prime_ratio=0.0)
    with pytest.raises(DomainError):
        OffResonantDrive(amp1=math.inf)


def test_defaults():
    off = OffResonantDrive()
    assert (off.amp1, off.amp2, off.delta_prime_ratio) == (2.0, 1.0, 90.0)
    assert DEFAULT_OMEGA == pytest.approx(2 * PI * 50e3)
    # 90 * 50 kHz = 4.5 MHz
    assert off.delta_prime_ratio * DEFAULT_OMEGA / (2 * PI) == pytest.approx(4.5e6)


def test_duration_realizes_pulse_area():
    m = NoiseModel(epsilon=0.2, offres=OffResonantDrive())
    h = DriveHamiltonian.for_pulse(Pulse(PI / 2, 0.3), m, NoiseDraw(delta=0.01, phi1=1.0, phi2=2.0))
    assert h.duration == pytest.approx(PI / 2 * 1.2 / m.omega, rel=1e-15)
    assert (h.delta, h.phi1, h.phi2, h.phi) == (0.01, 1.0, 2.0, 0.3)
    assert h.delta_prime == pytest.approx(90 * m.omega)


def test_hamiltonian_rejects_non_finite():
    with pytest.raises(DomainError):
        drive(phi1=math.nan)
    with pytest.raises(DomainError):
        DriveHamiltonian(omega=OMEGA, phi=0.0, duration=-1.0)


# --- closed form ----------------------------------------------------------------


def test_closed_form_examples():
    m0 = NoiseModel()
    assert max_entry(propagator_closed_form(Pulse(PI, 0.0), m0) - MINUS_I_X) < 1e-15
    assert max_entry(propagator_closed_form(Pulse(PI, 0.0), NoiseModel(epsilon=1.0)) + np.eye(2)) < 1e-15


def test_closed_form_tilted_pi_against_series():
    U = propagator_closed_form(Pulse(PI, 0.0), NoiseModel(), 0.1)
    ref = expm_taylor(-0.5j * PI * (SX + 0.1 * SZ))
    assert max_entry(U - ref) < 1e-10
    f = gate_fidelity(MINUS_I_X, U)
    assert f == pytest.approx(gate_fidelity(MINUS_I_X, ref), abs=1e-10)
    # direct trace: |<-iX, U>|^2/4 = sin^2(a/2)/1.01 with a = pi sqrt(1.01)
    assert f == pytest.approx(math.sin(PI * math.sqrt(1.01) / 2) ** 2 / 1.01, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 4 * PI), st.floats(-PI, PI), st.floats(-0.9, 2.0), st.floats(0, 0.2))
def test_closed_form_area_scaling_is_exact(theta, phi, eps, delta):
    a = propagator_closed_form(Pulse(theta, phi), NoiseModel(epsilon=eps), delta)
    b = propagator_closed_form(Pulse(theta * (1 + eps), phi), NoiseModel(), delta)
    assert np.array_equal(a, b)


@settings(max_examples=100, deadline=None)
@given(st.floats(-2 * PI, 2 * PI), st.floats(-0.9, 1.0), st.floats(0, 0.2), st.floats(0, 2 * PI))
def test_frame_updates_error_free(theta, eps, delta, phi1):
    z = Pulse(theta, 0.0, PulseKind.FRAME)
    exact = np.diag([cmath.exp(-0.5j * theta), cmath.exp(0.5j * theta)])
    m = NoiseModel(epsilon=eps, delta_max=delta, offres=OffResonantDrive())
    for U in (propagator_closed_form(z, m, delta), pulse_propagator(z, m, NoiseDraw(delta, phi1, 0.3))):
        assert max_entry(U - exact) < 1e-15
        assert max_entry(U @ Z - Z @ U) < 1e-15


def test_closed_form_normalizes_negative_angles():
    a = propagator_closed_form(Pulse(-PI / 2, 0.0), NoiseModel(epsilon=0.1), 0.02)
    b = propagator_closed_form(Pulse(PI / 2, PI), NoiseModel(epsilon=0.1), 0.02)
    assert max_entry(a - b) < 1e-15


# --- analytic integrals ---------------------------------------------------------


def _cquad(f, a, b):
    re = quad(lambda t: f(t).real, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    im = quad(lambda t: f(t).imag, a, b, epsabs=1e-14, epsrel=1e-13, limit=400)[0]
    return complex(re, im)


@pytest.mark.parametrize("n", [0, 1, 2, 5])
@pytest.mark.parametrize("w", [0.0, 1e-6, 0.3, 1.9, 2.1, 37.0, -50.0])
def test_moment_against_quadrature(n, w):
    T = 1.0
    ref = _cquad(lambda t: t**n * cmath.exp(1j * w * t), 0, T)
    assert abs(noise._moment(n, w, T) - ref) < 1e-12


@pytest.mark.parametrize("a,b", [(0.0, 0.0), (3.0, 1e-5), (3.0, -7.0), (-20.0, 20.0), (40.0, 0.5), (1e-7, 12.0)])
def test_triangle_against_quadrature(a, b):
    T = 1.0

    def inner(t1):
        return _cquad(lambda t2: cmath.exp(1j * b * t2), 0, t1)

    ref = _cquad(lambda t1: cmath.exp(1j * a * t1) * inner(t1), 0, T)
    assert abs(noise._triangle(a, b, T) - ref) < 1e-10


# --- Magnus ---------------------------------------------------------------------


def test_magnus_without_offres_is_resonant_rotation():
    h = drive(amp1=0.0, amp2=0.0)
    assert max_entry(magnus2_propagator(h) - MINUS_I_X) < 1e-15


def test_magnus_zero_duration_is_identity():
    h = DriveHamiltonian(omega=OMEGA, phi=0.0, duration=0.0, amp1=2.0, amp2=1.0, delta_prime=90 * OMEGA)
    assert max_entry(magnus2_propagator(h) - np.eye(2)) == 0.0


def test_magnus_requires_nonzero_offres_detuning():
    h = DriveHamiltonian(omega=OMEGA, phi=0.0, duration=PI / OMEGA, amp1=2.0, delta_prime=0.0)
    with pytest.raises(DomainError):
        magnus2_propagator(h)


def test_magnus_default_regime_matches_integrator():
    h = drive(90.0)
    assert max_entry(magnus2_propagator(h) - integrator_propagator(h, 100_000)) < 1e-6


def test_magnus_against_independent_time_ordered_oracle():
    # slower oscillation so the series-oracle product is affordable
    h = drive(12.0, theta=PI / 2, phi=0.4, phi1=0.9, phi2=2.2, delta=0.03)
    ref = time_ordered(lab_hamiltonian(h), h.duration, 6000)
    assert max_entry(magnus2_propagator(h) - ref) < 1e-5
    assert max_entry(integrator_propagator(h, 6000) - ref) < 1e-12


@settings(max_examples=12, deadline=None)
@given(
    st.floats(50, 200),
    st.sampled_from([PI / 2, PI, 2 * PI]),
    st.floats(0, 2 * PI),
    st.floats(0, 2 * PI),
    st.floats(0, 2 * PI),
    st.floats(0, 0.06),
)
def test_magnus_within_1e4_when_far_detuned(ratio, theta, phi, phi1, phi2, delta):
    h = drive(ratio, theta=theta, phi=phi, phi1=phi1, phi2=phi2, delta=delta)
    assert max_entry(magnus2_propagator(h) - integrator_propagator(h, 100_000)) <= 1e-4


@settings(max_examples=50, deadline=None)
@given(st.floats(20, 300), st.floats(0, 2 * PI), st.floats(0, 2 * PI), st.integers(1, 64))
def test_magnus_unitary(ratio, phi1, phi2, segments):
    h = drive(ratio, phi1=phi1, phi2=phi2)
    assert unitarity_defect(magnus2_propagator(h, segments=segments)) < 1e-12


def test_single_expansion_error_is_third_order_in_amplitude():
    # the neglected terms start at third order in the off-resonant amplitude
    h_ref = [drive(90.0, amp1=2 * s, amp2=s, phi1=0.4, phi2=1.1) for s in (0.25, 0.5)]
    errs = [max_entry(magnus2_propagator(h, segments=1) - integrator_propagator(h, 100_000)) for h in h_ref]
    assert 6.0 <= errs[1] / errs[0] <= 10.0


def test_segmented_expansion_converges_at_fourth_order():
    h = drive(90.0, phi1=0.4, phi2=1.1)
    ref = integrator_propagator(h, 200_000)
    n = magnus_segments(h) // 4
    e1 = max_entry(magnus2_propagator(h, segments=n) - ref)
    e2 = max_entry(magnus2_propagator(h, segments=2 * n) - ref)
    assert 10.0 <= e1 / e2 <= 20.0


def test_magnus_segments_must_be_positive():
    with pytest.raises(ValueError):
        magnus2_propagator(drive(), segments=0)


# --- integrator -----------------------------------------------------------------


def test_integrator_constant_hamiltonian():
    h = DriveHamiltonian(omega=OMEGA, phi=0.0, duration=PI / OMEGA)
    assert max_entry(integrator_propagator(h, 10_000) - MINUS_I_X) < 1e-8


def test_integrator_richardson_ratio():
    h = drive(90.0, phi1=0.7, phi2=2.9, delta=0.02)
    ref = integrator_propagator(h, 256_000)
    e = [max_entry(integrator_propagator(h, n) - ref) for n in (2000, 4000, 8000)]
    assert 3.5 <= e[0] / e[1] <= 4.5
    assert 3.5 <= e[1] / e[2] <= 4.5


@pytest.mark.parametrize("ratio", [1.0, 5.0, 10.0])
def test_integrator_plateau(ratio):
    h = drive(ratio, phi1=0.7, phi2=2.9)
    assert max_entry(integrator_propagator(h, 1000) - integrator_propagator(h, 100_000)) < 1e-4


def test_integrator_step_floor():
    with pytest.raises(ValueError):
        integrator_propagator(drive(), 999)


# --- effective tilt -------------------------------------------------------------


def test_effective_delta_without_offres():
    assert abs(effective_delta(drive(amp1=0.0, amp2=0.0))) < 1e-10
    assert effective_delta(drive(amp1=0.0, amp2=0.0, delta=0.04)) == pytest.approx(0.04, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 2 * PI), st.floats(0, 2 * PI), st.floats(0, 2 * PI))
def test_effective_delta_frame_invariant(phi1, phi2, alpha):
    a = effective_delta(drive(phi1=phi1, phi2=phi2))
    b = effective_delta(drive(phi=alpha, phi1=phi1 + alpha, phi2=phi2 + alpha))
    assert b == pytest.approx(a, abs=1e-9)


def test_tilt_decreases_with_offres_detuning():
    tilts = [abs(effective_delta(drive(r))) for r in (45.0, 90.0, 180.0)]
    assert tilts[0] > tilts[1] > tilts[2]
    for r, t in zip((45.0, 90.0, 180.0), tilts):
        v = rotation_vector(integrator_propagator(drive(r)))
        assert abs(v[2] / math.hypot(v[0], v[1])) == pytest.approx(t, rel=1e-3)


def test_effective_delta_band():
    grid = np.linspace(0, 2 * PI, 32, endpoint=False)
    hz = np.array([[effective_delta(drive(phi1=a, phi2=b)) * 50e3 for b in grid] for a in grid])
    span = np.abs(hz)
    # a few kHz at most, reaching zero somewhere; within a factor 2 of a 0-3 kHz band
    assert span.min() < 150.0
    assert 1.5e3 <= span.max() <= 6e3


def test_effective_delta_undefined_near_identity():
    with pytest.raises(DomainError):
        effective_delta(drive(theta=2 * PI, amp1=0.0, amp2=0.0))


# --- dispatch -------------------------------------------------------------------


def test_pulse_propagator_routes():
    p = Pulse(PI / 2, 0.3)
    m = NoiseModel(epsilon=0.05)
    assert np.array_equal(pulse_propagator(p, m, NoiseDraw(0.02)), propagator_closed_form(p, m, 0.02))
    m2 = NoiseModel(epsilon=0.05, offres=OffResonantDrive())
    d = NoiseDraw(0.02, 1.0, 2.0)
    assert np.array_equal(pulse_propagator(p, m2, d), magnus2_propagator(DriveHamiltonian.for_pulse(p, m2, d)))
    assert gate_fidelity(pulse_propagator(p, m2, d), rotation(PI / 2, (math.cos(0.3), math.sin(0.3), 0))) > 0.99
