"""Randomized-benchmarking simulation.

Random streams
--------------
Every sequence owns three independent Philox streams seeded from
``SeedSequence(seed, spawn_key=(repeat, L, sequence_id, purpose))`` with
``purpose`` 0 for the Clifford draws and the target bit, 1 for the noise
realization and 2 for measurement shots. Records are therefore a pure
function of the experiment, whatever order or process evaluates them,
and experiments that differ only in scheme or epsilon see the same random
sequences.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .clifford import CliffordGate, clifford_table, inversion_gate, sample_indices
from .noise import NoiseDraw, NoiseModel, pulse_propagator
from .pulses import Pulse, Scheme, UnsupportedTargetError, expand

__all__ = [
    "DEFAULT_LENGTHS",
    "Measurement",
    "RBExperiment",
    "SequenceRecord",
    "sequence_streams",
    "sequence_pulses",
    "run_sequence",
    "run_experiment",
    "SweepRow",
    "epsilon_sweep",
    "RECORD_COLUMNS",
    "records_to_csv",
    "records_from_csv",
    "records_to_json",
    "records_from_json",
]

DEFAULT_LENGTHS = (1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1000)

_CLIFFORD_STREAM, _NOISE_STREAM, _SHOT_STREAM = 0, 1, 2


class Measurement(str, enum.Enum):
    SAMPLED = "sampled"
    EXACT = "exact"


@dataclass(frozen=True)
class RBExperiment:
    lengths: tuple[int, ...] = DEFAULT_LENGTHS
    sequences_per_length: int = 20
    shots: int = 800
    scheme: Scheme = Scheme.B2
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0
    measurement: Measurement = Measurement.SAMPLED
    skip_identity: bool = False
    z_as_drive: bool = False
    repeat: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(int(L) for L in self.lengths))
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        object.__setattr__(self, "measurement", Measurement(self.measurement))
        if not self.lengths or any(L < 1 for L in self.lengths):
            raise ValueError("lengths must be non-empty and all >= 1")
        if any(b <= a for a, b in zip(self.lengths, self.lengths[1:])):
            raise ValueError("lengths must be strictly increasing")
        if self.sequences_per_length < 2:
            raise ValueError("sequences_per_length must be >= 2")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def with_(self, **changes) -> "RBExperiment":
        return replace(self, **changes)


@dataclass(frozen=True)
class SequenceRecord:
    L: int
    sequence_id: int
    clifford_indices: tuple[int, ...]
    target: int
    survival: float
    shots: int
    scheme: str = ""
    epsilon: float = 0.0
    delta_draw: float = 0.0
    probability: float = float("nan")


def sequence_streams(seed: int, L: int, sequence_id: int, repeat: int = 0):
    """``(clifford_rng, noise_rng, shot_rng)`` for one sequence."""
    return tuple(
        np.random.Generator(
            np.random.Philox(np.random.SeedSequence(seed, spawn_key=(repeat, L, sequence_id, purpose)))
        )
        for purpose in (_CLIFFORD_STREAM, _NOISE_STREAM, _SHOT_STREAM)
    )


def _gate_pulses(gate: CliffordGate, exp: RBExperiment) -> list[Pulse]:
    if gate.index == 1:
        if exp.skip_identity or exp.scheme is Scheme.PRIMITIVE:
            return []
        try:
            # pure correction block; the zero-angle target pulse is dropped
            return [p for p in expand(Pulse(0.0, 0.0), exp.scheme) if p.theta != 0.0]
        except UnsupportedTargetError:
            return []
    out: list[Pulse] = []
    for p in gate.decomposition:
        out.extend(expand(p, exp.scheme))
    return out


def sequence_pulses(gates: Sequence[CliffordGate], exp: RBExperiment) -> list[Pulse]:
    """All physical pulses of a gate sequence, in time order."""
    cache: dict[int, list[Pulse]] = {}
    out: list[Pulse] = []
    for g in gates:
        if g.index not in cache:
            cache[g.index] = _gate_pulses(g, exp)
        out.extend(cache[g.index])
    return out


def _draw_noise(model: NoiseModel, rng: np.random.Generator) -> NoiseDraw:
    # fixed draw order keeps streams comparable across noise settings
    u_delta, u1, u2 = rng.random(3)
    phi1 = phi2 = 0.0
    if model.offres is not None:
        if model.offres.resample == "fixed":
            phi1, phi2 = model.offres.phi1, model.offres.phi2
        else:
            phi1, phi2 = 2 * math.pi * u1, 2 * math.pi * u2
    return NoiseDraw(delta=float(model.delta_max * u_delta), phi1=float(phi1), phi2=float(phi2))


def _total_propagator(pulses: list[Pulse], model: NoiseModel, draw: NoiseDraw, rng) -> np.ndarray:
    if model.offres is not None and model.offres.resample == "pulse":
        table = []
        for p in pulses:
            u1, u2 = rng.random(2)
            d = replace(draw, phi1=2 * math.pi * u1, phi2=2 * math.pi * u2)
            table.append(pulse_propagator(p, model, d))
        order = np.arange(len(pulses), dtype=np.intp)
    else:
        slots: dict[Pulse, int] = {}
        order = np.fromiter((slots.setdefault(p, len(slots)) for p in pulses), dtype=np.intp, count=len(pulses))
        table = [pulse_propagator(p, model, draw) for p in slots]
    if not table:
        return np.eye(2, dtype=np.complex128)
    return kernels.chain_product(np.array(table), order)


def run_sequence(L: int, sequence_id: int, exp: RBExperiment) -> SequenceRecord:
    """Simulate one random sequence of ``L`` Cliffords plus its inversion gate."""
    crng, nrng, srng = sequence_streams(exp.seed, L, sequence_id, exp.repeat)
    table = clifford_table(exp.z_as_drive)
    indices = sample_indices(L, crng)
    target = int(crng.integers(0, 2))
    gates = [table[i - 1] for i in indices]
    gates.append(inversion_gate(gates, target, exp.z_as_drive))

    draw = _draw_noise(exp.noise, nrng)
    U = _total_propagator(sequence_pulses(gates, exp), exp.noise, draw, nrng)
    prob = min(1.0, max(0.0, float(abs(U[target, 0]) ** 2)))
    if exp.measurement is Measurement.EXACT:
        survival = prob
    else:
        survival = int(srng.binomial(exp.shots, prob)) / exp.shots
    return SequenceRecord(
        L=L,
        sequence_id=sequence_id,
        clifford_indices=tuple(int(i) for i in indices) + (gates[-1].index,),
        target=target,
        survival=survival,
        shots=exp.shots,
        scheme=exp.scheme.value,
        epsilon=exp.noise.epsilon,
        delta_draw=draw.delta,
        probability=prob,
    )


def _run_length(args) -> list[SequenceRecord]:
    L, exp = args
    return [run_sequence(L, s, exp) for s in range(exp.sequences_per_length)]


def run_experiment(exp: RBExperiment, workers: int = 1) -> list[SequenceRecord]:
    """All records, ordered by ``(L, sequence_id)``.

    With ``workers > 1`` lengths are farmed out to worker processes; the
    result is bit-identical to the serial run.
    """
    jobs = [(L, exp) for L in exp.lengths]
    if workers <= 1:
        chunks = map(_run_length, jobs)
        return [r for chunk in chunks for r in chunk]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [r for chunk in pool.map(_run_length, jobs) for r in chunk]


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    scheme: str
    repeat: int
    avg_error: float
    stderr: float
    p: float
    A0: float
    B0: float
    flagged: bool
    message: str = ""


def epsilon_sweep(
    base: RBExperiment,
    epsilons: Iterable[float],
    schemes: Sequence[Scheme | str] = tuple(Scheme),
    repeats: int = 1,
    workers: int = 1,
    spam_init: tuple[float, float] | None = None,
) -> list[SweepRow]:
    """Fit the RB error for every ``(epsilon, scheme, repeat)`` combination.

    Fit failures become flagged rows with NaN estimates. Too few lengths
    for any fit raises ``InsufficientDataError`` before simulating.
    """
    from .fitstats import DEFAULT_SPAM, FitError, InsufficientDataError, aggregate, fit_decay

    if len(base.lengths) < 4:
        raise InsufficientDataError("need at least 4 distinct lengths to fit 3 parameters")
    spam = DEFAULT_SPAM if spam_init is None else spam_init
    rows = []
    for eps in epsilons:
        for scheme in schemes:
            scheme = Scheme(scheme)
            for rep in range(repeats):
                exp = base.with_(noise=base.noise.with_epsilon(float(eps)), scheme=scheme, repeat=rep)
                records = run_experiment(exp, workers=workers)
                try:
                    fit = fit_decay(aggregate(records), spam)
                except FitError as err:
                    nan = float("nan")
                    rows.append(SweepRow(float(eps), scheme.value, rep, nan, nan, nan, nan, nan, True, str(err)))
                    continue
                rows.append(
                    SweepRow(
                        float(eps), scheme.value, rep, fit.avg_error, fit.stderr_avg_error,
                        fit.p, fit.A0, fit.B0, fit.flagged, fit.message,
                    )
                )  # fmt: skip
    return rows


# --- serialization ---------------------------------------------------------

RECORD_COLUMNS = ("L", "sequence_id", "scheme", "epsilon", "delta_draw", "target", "survival", "shots")


def records_to_csv(records: Iterable[SequenceRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RECORD_COLUMNS)
    for r in records:
        w.writerow([r.L, r.sequence_id, r.scheme, repr(float(r.epsilon)), repr(float(r.delta_draw)), r.target, repr(float(r.survival)), r.shots])
    return buf.getvalue()


def records_from_csv(text: str) -> list[SequenceRecord]:
    rows = csv.DictReader(io.StringIO(text))
    missing = set(RECORD_COLUMNS) - set(rows.fieldnames or ())
    if missing:
        raise ValueError(f"records CSV missing columns: {sorted(missing)}")
    return [
        SequenceRecord(
            L=int(row["L"]),
            sequence_id=int(row["sequence_id"]),
            clifford_indices=(),
            target=int(row["target"]),
            survival=float(row["survival"]),
            shots=int(row["shots"]),
            scheme=row["scheme"],
            epsilon=float(row["epsilon"]),
            delta_draw=float(row["delta_draw"]),
        )
        for row in rows
    ]


def records_to_json(records: Iterable[SequenceRecord]) -> str:
    payload = []
    for r in records:
        d = asdict(r)
        d["clifford_indices"] = list(r.clifford_indices)
        payload.append(d)
    return json.dumps(payload, indent=1, allow_nan=True) + "\n"


def records_from_json(text: str) -> list[SequenceRecord]:
    fields = set(SequenceRecord.__dataclass_fields__)
    out = []
    for d in json.loads(text):
        unknown = set(d) - fields
        if unknown:
            raise ValueError(f"unknown record fields: {sorted(unknown)}")
        d = dict(d, clifford_indices=tuple(d.get("clifford_indices", ())))
        out.append(SequenceRecord(**d))
    return out
