"""Experiment configuration: versioned JSON schema, parsing, validation."""

import json

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError

SCHEMA_VERSION = 1


class LossConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    kind: str = "parameterized"  # or "grid"
    margin_a: float = 0.5
    grid_points_per_axis: int = 9
    grid_box: list[list[float]] | None = None
    grid_reduction: str = "sum"  # or "mean"
    grid_use_margin: bool = False

    @field_validator("kind")
    @classmethod
    def _kind(cls, v):
        if v not in ("parameterized", "grid"):
            raise ValueError(f"loss kind must be 'parameterized' or 'grid', got '{v}'")
        return v

    @field_validator("margin_a")
    @classmethod
    def _margin(cls, v):
        if v <= 0:
            raise ValueError("margin_a must be positive")
        return v

    @field_validator("grid_reduction")
    @classmethod
    def _red(cls, v):
        if v not in ("sum", "mean"):
            raise ValueError("grid_reduction must be 'sum' or 'mean'")
        return v


class NetworkConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    K: list[int] = Field(default_factory=lambda: [1, 64, 1])
    beta: list[int] = Field(default_factory=lambda: [1, 16, 1])
    H_c: list[int] = Field(default_factory=lambda: [1, 32, 1])
    phi: list[int] | None = None  # None -> fixed sum V = H + H_c + C
    C_grid: list[int] = Field(default_factory=lambda: [3, 32, 1])


class OptimizerConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    step_size: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon_hat: float = 1e-8
    epochs: int = 2000
    early_stop_loss: float | None = None

    @field_validator("epochs")
    @classmethod
    def _epochs(cls, v):
        if v < 1:
            raise ValueError("epochs must be >= 1")
        return v

    @field_validator("step_size")
    @classmethod
    def _step(cls, v):
        if v <= 0:
            raise ValueError("step_size must be positive")
        return v


class RoaConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    gamma: float = 1.0
    n_samples: int = 100
    box: list[list[float]] | None = None

    @field_validator("gamma")
    @classmethod
    def _gamma(cls, v):
        if v <= 0:
            raise ValueError("roa gamma must be positive")
        return v


class GainsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    D: list[list[float]] = Field(default_factory=lambda: [[5.0]])
    D_c: list[list[float]] = Field(default_factory=lambda: [[6.0]])


class SimulationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    dt: float = 0.01
    horizon: float = 50.0
    n_trajectories: int = 10
    init_box: list[list[float]] = Field(
        default_factory=lambda: [[-2.0, 2.0], [-2.0, 2.0], [-2.0, 2.0]]
    )
    tail_fraction: float = 0.1
    tolerance: float = 0.05

    @field_validator("dt")
    @classmethod
    def _dt(cls, v):
        if v <= 0:
            raise ValueError("dt must be positive")
        return v


class InlineSystem(BaseModel):
    """Constant-matrix PHS with a named or quadratic Hamiltonian."""

    model_config = ConfigDict(extra="forbid")
    state_dim: int
    input_dim: int
    J: list[list[float]]
    R: list[list[float]]
    G: list[list[float]]
    hamiltonian: dict  # {"kind": "quadratic", "Q": [[...]]} or {"kind": "pendulum"|"msd"}
    region: list[list[float]] | None = None


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")
    schema_version: int = SCHEMA_VERSION
    system: str | InlineSystem = "pendulum"
    target: list[float] = Field(
        default_factory=lambda: [float(np.pi / 4.0), 0.0]
    )
    loss: LossConfig = Field(default_factory=LossConfig)
    networks: NetworkConfig = Field(default_factory=NetworkConfig)
    seed: int = 0
    xi_star_init: list[float] = Field(default_factory=lambda: [0.0])
    optimizer: OptimizerConfig = Field(default_factory=OptimizerConfig)
    roa: RoaConfig | None = None
    gains: GainsConfig = Field(default_factory=GainsConfig)
    simulation: SimulationConfig = Field(default_factory=SimulationConfig)
    sweep_a: list[float] = Field(
        default_factory=lambda: [0.1, 0.25, 0.5, 0.75, 1.0]
    )
    out_dir: str | None = None

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema_version {v}; this build reads version {SCHEMA_VERSION}"
            )
        return v

    @field_validator("system")
    @classmethod
    def _system(cls, v):
        if isinstance(v, str) and v not in ("pendulum", "msd"):
            raise ValueError(
                f"unknown builtin system '{v}' (builtins: pendulum, msd)"
            )
        return v

    def to_dict(self):
        return json.loads(self.model_dump_json())


def config_from_dict(data):
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        lines = [
            f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()
        ]
        raise ConfigError("invalid configuration:\n  " + "\n  ".join(lines)) from exc


def load_config(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return config_from_dict(data)


def save_config(cfg, path):
    with open(path, "w") as f:
        json.dump(cfg.to_dict(), f, indent=2, sort_keys=True)
