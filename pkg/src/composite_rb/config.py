"""Experiment configuration documents (YAML) and their mapping onto the engine.

Every physical quantity carries its unit in the key name. Frequencies are
ordinary frequencies in hertz (``omega_hz`` is the Rabi frequency divided
by 2 pi); the engine works with the dimensionless ratios to ``omega_hz``.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .fitstats import DEFAULT_SPAM
from .noise import NoiseModel, OffResonantDrive
from .pulses import Scheme
from .rbengine import DEFAULT_LENGTHS, Measurement, RBExperiment

__all__ = [
    "SCHEMA_VERSION",
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "dump_config",
]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """A configuration document failed validation.

    ``errors`` is a list of ``{"path": "noise.omega_hz", "message": ...}``.
    """

    def __init__(self, errors: list[dict]):
        self.errors = errors
        lines = "; ".join(f"{e['path'] or '<root>'}: {e['message']}" for e in errors)
        super().__init__(f"invalid configuration: {lines}")


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ExperimentSection(_Section):
    lengths: list[int] = Field(default_factory=lambda: list(DEFAULT_LENGTHS))
    sequences_per_length: int = Field(20, ge=2)
    shots: int = Field(800, ge=1)
    scheme: Scheme = Scheme.B2
    seed: int = Field(0, ge=0, lt=2**64)
    measurement: Measurement = Measurement.SAMPLED
    skip_identity: bool = False
    z_as_drive: bool = False

    @field_validator("lengths")
    @classmethod
    def _increasing(cls, v):
        if not v or min(v) < 1:
            raise ValueError("lengths must be non-empty and all >= 1")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("lengths must be strictly increasing")
        return v


class OffResonantSection(_Section):
    amp1: float = 2.0
    amp2: float = 1.0
    delta_prime_hz: float = Field(4.5e6, gt=0)
    phi1_rad: float = 0.0
    phi2_rad: float = 0.0
    resample: Literal["sequence", "pulse", "fixed"] = "sequence"


class NoiseSection(_Section):
    epsilon: float = Field(0.0, gt=-1)
    omega_hz: float = Field(50e3, gt=0)
    delta_max_hz: float = Field(3e3, ge=0)
    offres: Optional[OffResonantSection] = Field(default_factory=OffResonantSection)

    def model(self) -> NoiseModel:
        offres = None
        if self.offres is not None:
            o = self.offres
            offres = OffResonantDrive(
                amp1=o.amp1, amp2=o.amp2, delta_prime_ratio=o.delta_prime_hz / self.omega_hz,
                phi1=o.phi1_rad, phi2=o.phi2_rad, resample=o.resample,
            )  # fmt: skip
        return NoiseModel(
            epsilon=self.epsilon,
            delta_max=self.delta_max_hz / self.omega_hz,
            offres=offres,
            omega=2 * math.pi * self.omega_hz,
        )


class FitSection(_Section):
    a0_init: float = DEFAULT_SPAM[0]
    b0_init: float = DEFAULT_SPAM[1]


class SweepSection(_Section):
    epsilons: list[float] = Field(default_factory=lambda: [round(0.1 * k, 1) for k in range(-6, 7)])
    schemes: list[Scheme] = Field(default_factory=lambda: list(Scheme))
    repeats: int = Field(1, ge=1)

    @field_validator("epsilons")
    @classmethod
    def _above_minus_one(cls, v):
        if not v:
            raise ValueError("at least one epsilon is required")
        if any(not math.isfinite(e) or e <= -1 for e in v):
            raise ValueError("every epsilon must be finite and > -1")
        return v


class OutputSection(_Section):
    out_dir: Optional[str] = None
    workers: int = Field(1, ge=1)


class ExperimentConfig(_Section):
    schema_version: int = SCHEMA_VERSION
    experiment: ExperimentSection = Field(default_factory=ExperimentSection)
    noise: NoiseSection = Field(default_factory=NoiseSection)
    fit: FitSection = Field(default_factory=FitSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _version(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {self.schema_version}; expected {SCHEMA_VERSION}")
        return self

    def rb_experiment(self) -> RBExperiment:
        e = self.experiment
        return RBExperiment(
            lengths=tuple(e.lengths),
            sequences_per_length=e.sequences_per_length,
            shots=e.shots,
            scheme=e.scheme,
            noise=self.noise.model(),
            seed=e.seed,
            measurement=e.measurement,
            skip_identity=e.skip_identity,
            z_as_drive=e.z_as_drive,
        )

    @property
    def spam_init(self) -> tuple[float, float]:
        return (self.fit.a0_init, self.fit.b0_init)

    def updated(self, section: str, **changes) -> "ExperimentConfig":
        """Copy with fields of one section replaced (validated)."""
        data = self.model_dump(mode="json")
        data[section].update(changes)
        return parse_config(data)


def _errors(exc: ValidationError) -> list[dict]:
    return [
        {"path": ".".join(str(p) for p in err["loc"]), "message": err["msg"]}
        for err in exc.errors(include_url=False)
    ]


def parse_config(data) -> ExperimentConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([{"path": "", "message": "top level must be a mapping"}])
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_errors(exc)) from None


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Read a YAML config; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig()
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([{"path": "", "message": f"not valid YAML: {exc}"}]) from None
    return parse_config(data)


def dump_config(cfg: ExperimentConfig, include_output: bool = True) -> str:
    """YAML text that reloads to ``cfg``.

    ``include_output=False`` drops the ``output`` section, which only says
    where and how a run executes; artifact copies use it so that they do not
    depend on the worker count.
    """
    data = cfg.model_dump(mode="json", exclude=None if include_output else {"output"})
    return yaml.safe_dump(data, sort_keys=False, default_flow_style=False)
