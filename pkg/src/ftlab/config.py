"""Experiment configuration: a YAML file validated against a strict schema."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigurationError
from .noise import NoiseModel

KINDS = ("memory", "level1", "threshold-sweep", "coherent-collapse", "adversary-compare")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class NoiseConfig(_Strict):
    kind: Literal["none", "depolarizing", "adversarial", "coherent"] = "depolarizing"
    p_gate: float = Field(0.0, ge=0.0, le=1.0)
    p_idle: float = Field(0.0, ge=0.0, le=1.0)
    p_meas: float = Field(0.0, ge=0.0, le=1.0)
    two_qubit_rule: Literal["uniform15", "independent"] = "uniform15"
    strategy: Literal["all_Y_heuristic", "exhaustive_worst_case"] = "all_Y_heuristic"
    theta: float = 0.0

    def model(self) -> NoiseModel:
        # the exhaustive adversary is run by its own experiment; stochastic runs use the heuristic
        return NoiseModel(self.kind, self.p_gate, self.p_idle, self.p_meas, self.two_qubit_rule,
                          "all_Y_heuristic" if self.kind != "adversarial" else self.strategy, self.theta)


class OutputConfig(_Strict):
    dir: str = "results"
    name: Optional[str] = None
    figures: bool = True


class ExperimentConfig(_Strict):
    kind: Literal["memory", "level1", "threshold-sweep", "coherent-collapse", "adversary-compare"]
    backend: Literal["frame", "tableau", "dense"] = "frame"
    code: Literal["none", "steane", "concat"] = "steane"
    input: Literal["0", "1", "+"] = "0"
    noise: NoiseConfig = NoiseConfig()
    p_grid: list[float] = []
    rounds: int = Field(1, ge=1)
    shots: int = Field(10_000, ge=1)
    seed: int = Field(0, ge=0)
    min_failures: int = Field(0, ge=0)
    max_shots: Optional[int] = Field(None, ge=1)
    schedule: Literal["after_gate", "after_cnot", "none"] = "none"
    max_retries: int = Field(3, ge=1)
    chunk_size: int = Field(65_536, ge=1)
    error_timing: Literal["after", "before"] = "after"
    thetas: list[float] = [0.2, 0.6, 1.0]
    max_locations: int = Field(3, ge=0, le=6)
    output: OutputConfig = OutputConfig()

    @field_validator("p_grid")
    @classmethod
    def _probabilities(cls, v: list[float]) -> list[float]:
        for p in v:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{p} is not a probability")
        return v

    @model_validator(mode="after")
    def _consistent(self) -> ExperimentConfig:
        needs_grid = self.kind in ("memory", "level1", "threshold-sweep", "adversary-compare")
        if needs_grid and not self.p_grid:
            raise ValueError(f"{self.kind} needs a non-empty p_grid")
        if self.noise.kind == "coherent" and self.backend != "dense":
            raise ValueError(f"coherent noise needs backend 'dense', not {self.backend!r}")
        if self.kind == "coherent-collapse" and self.backend != "dense":
            raise ValueError("coherent-collapse runs on the dense backend")
        if self.kind == "level1" and self.backend == "dense":
            raise ValueError("level1 needs a Pauli backend (frame or tableau)")
        if self.kind in ("level1", "threshold-sweep") and self.noise.kind not in ("depolarizing", "adversarial"):
            raise ValueError(f"{self.kind} needs Pauli noise")
        if self.kind == "threshold-sweep" and len(self.p_grid) < 3:
            raise ValueError("threshold-sweep needs at least 3 p values")
        return self

    @property
    def label(self) -> str:
        return self.output.name or self.kind.replace("-", "_")


class RunConfig(_Strict):
    experiments: list[ExperimentConfig] = Field(min_length=1)


def _error_text(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        where = ".".join(str(x) for x in e["loc"]) or "<root>"
        parts.append(f"{where}: {e['msg']}")
    return "; ".join(parts)


def parse_config(data) -> RunConfig:
    """Validate a mapping: either one experiment or ``{"experiments": [...]}``."""
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping")
    if "experiments" not in data:
        data = {"experiments": [data]}
    try:
        return RunConfig.model_validate(data)
    except ValidationError as err:
        raise ConfigurationError(f"invalid config: {_error_text(err)}") from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as err:
        raise ConfigurationError(f"cannot read {path}: {err}") from None
    except yaml.YAMLError as err:
        raise ConfigurationError(f"{path} is not valid YAML: {err}") from None
    return parse_config(data)


def dump_config(cfg: RunConfig) -> str:
    """Canonical YAML: every field written out, keys sorted."""
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=True)


EXAMPLE_CONFIG = """\
# threshold sweep of one Steane EC round under circuit-level depolarizing noise
experiments:
  - kind: threshold-sweep
    backend: frame
    noise: {kind: depolarizing, p_gate: 0.001, p_meas: 0.001}
    p_grid: [0.0003, 0.001, 0.003]
    rounds: 1
    shots: 131072
    min_failures: 10
    seed: 1
    output: {dir: results, name: sweep}
"""
