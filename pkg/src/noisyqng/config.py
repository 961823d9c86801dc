"""Run configuration schema.

A run is described by one YAML document. Unknown keys anywhere are errors.
See the README for a complete example of every experiment type.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .optimizers import METRIC_SOURCES, VARIANTS, UpdateRule

EXPERIMENTS = ("optimize", "landscape", "sweep", "qfi-error", "appendix-check", "scalability")
P_ERROR_RANGE = (0.0, 0.1)


class ConfigError(ValueError):
    """Config could not be read or failed validation."""

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _check_p(p: float) -> float:
    lo, hi = P_ERROR_RANGE
    if not lo <= p <= hi:
        raise ValueError(f"p_error must lie in [{lo:g}, {hi:g}], got {p}")
    return p


class HamiltonianConfig(_Strict):
    J: float = 1.0
    omega_seed: int | None = 0
    omega_list: list[float] | None = None

    @field_validator("omega_list")
    @classmethod
    def _omega_range(cls, v):
        if v is not None and any(abs(w) > 1 for w in v):
            raise ValueError("on-site frequencies must lie in [-1, 1]")
        return v


class SystemConfig(_Strict):
    n_qubits: int = Field(4, ge=2, le=14)
    layers: int = Field(1, ge=1)
    hamiltonian: HamiltonianConfig = HamiltonianConfig()
    p_error: float = 1e-3
    two_qubit_error_factor: float = Field(10.0, ge=0)
    theta_noise_coefficient: float = Field(0.1, ge=0)

    @field_validator("p_error")
    @classmethod
    def _p(cls, v):
        return _check_p(v)

    @model_validator(mode="after")
    def _omega_length(self):
        omega = self.hamiltonian.omega_list
        if omega is not None and len(omega) != self.n_qubits:
            raise ValueError(f"omega_list needs {self.n_qubits} entries, got {len(omega)}")
        return self


class InversionConfig(_Strict):
    scheme: Literal["truncated-pseudo", "tikhonov"] = "truncated-pseudo"
    cutoff: float = Field(1e-8, ge=0)
    lambda_reg: float = Field(1e-4, ge=0)


class OptimizerConfig(_Strict):
    rule: Literal[VARIANTS] = "natural-gradient"  # type: ignore[valid-type]
    metric: Literal[METRIC_SOURCES] = "qfi-exact"  # type: ignore[valid-type]
    step_size: float = Field(0.2, gt=0)
    matched_step: bool = True
    steps: int = Field(30, ge=0)
    inversion: InversionConfig = InversionConfig()
    fidelity_mode: Literal["divide", "omit"] = "divide"
    theta0: list[float] | None = None
    init_radius: float = Field(0.5, ge=0)
    locate_optimum: bool = False

    def rule_for(self, variant: str | None = None, metric: str | None = None) -> UpdateRule:
        """Update rule; with ``matched_step`` the imaginary-time step is ``step_size / 4``."""
        variant = variant or self.rule
        kwargs = dict(
            metric=metric or self.metric,
            inversion=self.inversion.scheme,
            cutoff=self.inversion.cutoff,
            lambda_reg=self.inversion.lambda_reg,
            fidelity_mode=self.fidelity_mode,
        )
        if self.matched_step:
            return UpdateRule.matched(variant, self.step_size, **kwargs)
        return UpdateRule(variant, self.step_size, **kwargs)


class RuleEntry(_Strict):
    rule: Literal[VARIANTS]  # type: ignore[valid-type]
    metric: Literal[METRIC_SOURCES] | None = None  # type: ignore[valid-type]


class SweepConfig(_Strict):
    p_error: list[float] = [1e-4, 1e-3, 1e-2]
    repetitions: int = Field(25, ge=1)
    init_radius: float = Field(0.5, ge=0)
    rules: list[RuleEntry] = [
        RuleEntry(rule="gradient-descent"),
        RuleEntry(rule="natural-gradient"),
        RuleEntry(rule="imag-time-mixed"),
    ]
    optimum_starts: int = Field(3, ge=1)
    optimum_steps: int = Field(500, ge=1)
    optimum_step_size: float = Field(0.05, gt=0)
    optimum_metric: Literal[METRIC_SOURCES] = "qfi-exact"  # type: ignore[valid-type]

    @field_validator("p_error")
    @classmethod
    def _grid(cls, v):
        if not v:
            raise ValueError("p_error grid is empty")
        for p in v:
            _check_p(p)
        return v


class LandscapeConfig(_Strict):
    grid_points: int = Field(41, ge=2)
    p_error: float = 0.01
    start: list[float] | None = None
    init_radius: float = Field(0.5, ge=0)
    theta_noise_coefficient: float = Field(0.0, ge=0)

    @field_validator("p_error")
    @classmethod
    def _p(cls, v):
        return _check_p(v)

    @field_validator("start")
    @classmethod
    def _two(cls, v):
        if v is not None and len(v) != 2:
            raise ValueError("the landscape start needs exactly 2 parameters")
        return v


class QFIErrorConfig(_Strict):
    n_qubits: list[int] = [2, 3, 4, 5]
    p_error: list[float] = [1e-5, 3e-5, 1e-4, 3e-4, 1e-3]
    samples: int = Field(5, ge=1)
    radius: float = Field(0.1, ge=0)
    theta_noise_coefficient: float = Field(0.0, ge=0)

    @field_validator("p_error")
    @classmethod
    def _grid(cls, v):
        for p in v:
            _check_p(p)
        return v

    @field_validator("n_qubits")
    @classmethod
    def _sizes(cls, v):
        if not v or any(n < 2 or n > 8 for n in v):
            raise ValueError("qubit counts must lie in [2, 8]")
        return v


class AppendixConfig(_Strict):
    trials: int = Field(100, ge=1)
    dims: list[int] = [8, 16, 32, 64]
    eps_min: float = Field(0.01, ge=0, le=0.5)
    eps_max: float = Field(0.3, ge=0, le=0.5)
    anticommutator_eps: float = Field(0.05, ge=0, le=0.5)
    anticommutator_trials: int = Field(10, ge=1)

    @model_validator(mode="after")
    def _order(self):
        if self.eps_min > self.eps_max:
            raise ValueError("eps_min exceeds eps_max")
        return self


class ScalabilityConfig(_Strict):
    p_err: float = Field(1e-3, ge=0, lt=1)
    n_samples: float = Field(16.0, ge=1)
    gates_per_qubit: float = Field(3.0, gt=0)
    log_depth_coefficient: float = Field(10.0, gt=0)


class RunConfig(_Strict):
    experiment: Literal[EXPERIMENTS]  # type: ignore[valid-type]
    master_seed: int = Field(ge=0)
    output_dir: str | None = None
    system: SystemConfig = SystemConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    sweep: SweepConfig = SweepConfig()
    landscape: LandscapeConfig = LandscapeConfig()
    qfi_error: QFIErrorConfig = QFIErrorConfig()
    appendix: AppendixConfig = AppendixConfig()
    scalability: ScalabilityConfig = ScalabilityConfig()


def _format_error(err: dict) -> str:
    loc = ".".join(str(x) for x in err["loc"]) or "<root>"
    msg = err["msg"].removeprefix("Value error, ")
    if err["type"] == "missing":
        return f"{loc}: required key missing"
    if err["type"] == "extra_forbidden":
        return f"{loc}: unknown key"
    return f"{loc}: {msg}"


def read_document(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror or exc}"]) from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"YAML parse error: {exc}"]) from exc
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a mapping"])
    return doc


def violations(doc: dict) -> list[str]:
    """Every schema violation in ``doc``; empty when it is valid."""
    try:
        RunConfig.model_validate(doc)
    except ValidationError as exc:
        return [_format_error(e) for e in exc.errors()]
    return []


def load_config(path: str | Path, seed: int | None = None, output_dir: str | None = None) -> RunConfig:
    """Read and validate; ``seed`` and ``output_dir`` override the file."""
    doc = read_document(path)
    if seed is not None:
        doc["master_seed"] = seed
    if output_dir is not None:
        doc["output_dir"] = str(output_dir)
    found = violations(doc)
    if found:
        raise ConfigError(found)
    return RunConfig.model_validate(doc)
