import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _oracles import SX, SY, SZ, gate_fidelity, rotation
from composite_rb.clifford import (
    CLIFFORD_LABELS,
    audit_table,
    clifford_table,
    inversion_gate,
    parse_token,
    sample_indices,
    sample_sequence,
    sequence_ideal,
)
from composite_rb.pulses import Pulse, PulseKind, ideal_unitary

PI = math.pi


def conjugation_key(U):
    """Signed permutation of the Pauli axes, rounded; free of global phase."""
    R = np.array([[0.5 * np.trace(P @ U @ Q @ U.conj().T).real for Q in (SX, SY, SZ)] for P in (SX, SY, SZ)])
    return tuple(np.rint(R).astype(int).ravel())


def oracle_gate(label):
    """Unitary of a table label built from the series oracle, A first."""
    U = np.eye(2, dtype=complex)
    for tok in label.split("&"):
        tok = tok.strip()
        if tok == "I":
            continue
        sign = -1 if tok.startswith("-") else 1
        axis, _, frac = tok.lstrip("-").partition("/")
        angle = sign * PI / (int(frac) if frac else 1)
        vec = {"X": (1, 0, 0), "Y": (0, 1, 0), "Z": (0, 0, 1)}[axis]
        U = rotation(angle, vec) @ U
    return U


@pytest.fixture(params=[False, True], ids=["frame-z", "driven-z"])
def table(request):
    return clifford_table(request.param)


def test_table_shape(table):
    assert len(table) == 24
    assert [g.index for g in table] == list(range(1, 25))
    assert [g.label for g in table] == list(CLIFFORD_LABELS)
    assert CLIFFORD_LABELS[10] == "Z & X/2" and CLIFFORD_LABELS[23] == "-Y/2 & -Z/2"


def test_identity_gate():
    g = clifford_table()[0]
    assert g.decomposition == ()
    assert np.allclose(g.ideal, np.eye(2))


def test_gate_5_is_single_half_pi_x():
    assert clifford_table()[4].decomposition == (Pulse(PI / 2, 0.0),)


def test_z_tokens_are_frame_updates():
    assert parse_token("Z") == (Pulse(PI, 0.0, PulseKind.FRAME),)
    assert parse_token("-Z/2") == (Pulse(-PI / 2, 0.0, PulseKind.FRAME),)
    assert parse_token("-X/2") == (Pulse(PI / 2, PI),)
    assert parse_token("Y/2") == (Pulse(PI / 2, PI / 2),)
    assert all(p.is_drive for p in parse_token("Z/2", z_as_drive=True))


def test_gate_13_matches_x_times_half_z():
    U = clifford_table()[12].ideal
    expected = SX @ np.diag([1, 1j])  # X * Z(pi/2) up to phase: Z/2 first, then X
    assert gate_fidelity(U, expected) == pytest.approx(1.0, abs=1e-12)
    R = conjugation_key(U)
    assert sorted(abs(x) for x in R) == [0] * 6 + [1] * 3


@pytest.mark.parametrize("k", range(24))
def test_each_gate_matches_oracle(table, k):
    g = table[k]
    assert gate_fidelity(g.ideal, oracle_gate(g.label)) > 1 - 1e-12
    assert gate_fidelity(ideal_unitary(g.decomposition), g.ideal) > 1 - 1e-12


def test_group_structure_with_oracle_keys(table):
    keys = [conjugation_key(g.ideal) for g in table]
    assert len(set(keys)) == 24
    ks = set(keys)
    for a in table:
        for b in table:
            assert conjugation_key(b.ideal @ a.ideal) in ks


def test_stock_audit_passes(table):
    results = audit_table(table)
    assert all(r.passed for r in results), [r for r in results if not r.passed]


@pytest.mark.parametrize("rebuild_ideal", [False, True])
def test_audit_flags_corrupted_phase(rebuild_ideal):
    gates = list(clifford_table())
    g5 = gates[4]
    p = g5.decomposition[0]
    bad = (Pulse(p.theta, p.phi + 0.1),)
    ideal = ideal_unitary(bad) if rebuild_ideal else g5.ideal
    gates[4] = replace(g5, decomposition=bad, ideal=ideal)
    results = audit_table(gates)
    assert [r.index for r in results if not r.passed] == [5]


def test_audit_flags_duplicate_and_missing_gate():
    gates = list(clifford_table())
    gates[6] = replace(gates[5], index=7)
    results = audit_table(gates)
    assert not results[6].passed
    assert any("duplicates" in f for f in results[6].failures)


def test_audit_flags_short_table():
    results = audit_table(clifford_table()[:23])
    assert not any(r.passed for r in results)


# --- sampling -----------------------------------------------------------------


def test_empty_sequence():
    assert sample_sequence(0, np.random.default_rng(0)) == []


def test_negative_length_rejected():
    with pytest.raises(ValueError):
        sample_indices(-1, np.random.default_rng(0))


def test_sampling_reproducible():
    a = sample_indices(50, np.random.default_rng(123))
    b = sample_indices(50, np.random.default_rng(123))
    assert np.array_equal(a, b)


def test_sampling_uniform():
    n = 100_000
    idx = sample_indices(n, np.random.default_rng(2024))
    counts = np.bincount(idx, minlength=25)[1:]
    assert idx.min() >= 1 and idx.max() <= 24
    sigma = math.sqrt(n * (1 / 24) * (23 / 24))
    assert np.all(np.abs(counts - n / 24) < 5 * sigma)


# --- inversion ------------------------------------------------------------------


def test_inversion_of_empty_sequence():
    assert inversion_gate([], 0).index == 1


def test_inversion_after_x_is_lowest_index_qualifier():
    X = clifford_table()[1]
    inv = inversion_gate([X], 0)
    state = X.ideal @ np.array([1, 0])
    qualifiers = [g.index for g in clifford_table() if abs((g.ideal @ state)[0]) ** 2 > 1 - 1e-10]
    assert inv.index == min(qualifiers)


@settings(max_examples=1000, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 40), st.integers(0, 1), st.booleans())
def test_inversion_lands_on_target(seed, L, target, z_as_drive):
    seq = sample_sequence(L, np.random.default_rng(seed), z_as_drive)
    inv = inversion_gate(seq, target, z_as_drive)
    U = inv.ideal @ sequence_ideal(seq)
    assert abs(U[target, 0]) ** 2 == pytest.approx(1.0, abs=1e-10)


def test_gate_pulse_counts():
    counts = [sum(p.is_drive for p in g.decomposition) for g in clifford_table()]
    assert counts[:10] == [0, 1, 1, 0, 1, 1, 0, 1, 1, 0]
    assert all(c == 1 for c in counts[10:])
