"""Run configuration: validated schema plus YAML/JSON file loading.

A RunConfig fully determines a simulation (system, solver, excitation,
run length, sweep/scan axes, output location); its canonical JSON form is
hashed into every output so results are traceable to their inputs.
"""

from __future__ import annotations

import hashlib
import json
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, Field, field_validator, model_validator

from .model import SystemSpec
from .excitation import Modulation, Protocol, SwitchOff


class ConfigError(ValueError):
    pass


class SystemModel(BaseModel):
    dimension: Literal[1, 2] = 1
    coupling: float = Field(0.0, ge=0)
    symmetry: Literal["symmetric", "antisymmetric"] = "antisymmetric"
    softening: float = Field(0.0, ge=0)
    interaction_exponent: float = Field(1.0, gt=0)

    def to_spec(self) -> SystemSpec:
        return SystemSpec(**self.model_dump())


class SolverModel(BaseModel):
    method: Literal["grid", "basis"] = "basis"
    n_points: int = Field(2000, ge=3)  # grid points per axis
    n_basis: int = Field(60, ge=4)  # basis functions per sector
    extent: Optional[float] = Field(None, gt=0)
    dt: float = Field(0.02, gt=0)


class ExcitationModel(BaseModel):
    kind: Literal["switch_off", "modulation"] = "switch_off"
    # switch-off
    t_on: float = 1.0
    duration: float = 0.1
    # modulation
    frequency: Optional[float] = None
    depth: float = 5e-3
    center: float = 240.0
    width: float = 100.0

    @model_validator(mode="after")
    def _needs_frequency(self):
        if self.kind == "modulation" and self.frequency is None:
            raise ValueError("modulation excitation requires a frequency")
        return self

    def to_protocol(self) -> Protocol:
        if self.kind == "switch_off":
            return SwitchOff(t_on=self.t_on, duration=self.duration)
        return Modulation(frequency=self.frequency, depth=self.depth,
                          center=self.center, width=self.width)


class ScanModel(BaseModel):
    start: float = 1.7
    stop: float = 2.1
    step: float = Field(0.005, gt=0)

    def grid(self) -> list[float]:
        n = int(round((self.stop - self.start) / self.step))
        return [self.start + i * self.step for i in range(n + 1)]


class RunConfig(BaseModel):
    system: SystemModel = SystemModel()
    solver: SolverModel = SolverModel()
    excitation: Optional[ExcitationModel] = ExcitationModel()
    t_final: float = Field(120.0, gt=0)
    sample_every: int = Field(4, ge=1)
    couplings: Optional[list[float]] = None  # lambda sweep axis
    scan: Optional[ScanModel] = None  # omega_ext scan axis
    output_dir: str = "runs"
    workers: int = Field(1, ge=1)
    deterministic: bool = True

    @field_validator("couplings")
    @classmethod
    def _couplings_nonempty(cls, v):
        if v is not None and len(v) == 0:
            raise ValueError("couplings sweep needs at least one value")
        return v

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(), sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.sha1(self.canonical_json().encode()).hexdigest()[:12]


def load_config(path: str) -> RunConfig:
    """Parse a YAML (or JSON, a YAML subset) config file."""
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return parse_config(raw)


def parse_config(raw: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except Exception as exc:
        raise ConfigError(str(exc)) from exc
