"""Run configuration: a TOML file with ``[model]``, ``[grid]``, ``[experiment]``
and ``[output]`` sections. Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import List, Literal, Optional

import numpy as np
import tomli
import tomli_w
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .errors import ConfigError
from .experiment import SweepConfig, TargetSpec
from .solver import SolveOptions
from .spectral_model import (
    ControlOperatorSpec,
    MemoryKernel,
    NonlinearitySpec,
    QWienerSpec,
    SpectralModel,
)

__all__ = [
    "ModelSection",
    "GridSection",
    "ExperimentSection",
    "OutputSection",
    "RunConfig",
    "load_config",
    "parse_config",
    "dump_config",
    "config_hash",
    "build_model",
    "build_sweep_config",
]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _strictly_decreasing(values, name):
    if any(v <= 0 for v in values):
        raise ValueError(f"{name} entries must be > 0")
    if any(b >= a for a, b in zip(values, values[1:])):
        raise ValueError(f"{name} must be strictly decreasing")
    return values


class ModelSection(_Section):
    n_modes: int = Field(8, ge=1, le=64)
    eigenvalue_rule: Literal["neg_square", "list"] = "neg_square"
    eigenvalues: Optional[List[float]] = None
    horizon: float = Field(1.0, gt=0)
    kernel: Literal["zero", "exponential"] = "exponential"
    kernel_amplitude: float = 1.0
    kernel_decay: float = Field(1.0, gt=0)
    control: Literal["identity", "coupled"] = "coupled"
    noise_rule: Literal["inverse_square", "constant", "list"] = "inverse_square"
    noise_scale: float = Field(1.0, gt=0)
    noise_variances: Optional[List[float]] = None
    f: Literal["zero", "bounded"] = "bounded"
    g: Literal["zero", "bounded"] = "bounded"
    zeta: Literal["zero", "bounded"] = "bounded"

    @model_validator(mode="after")
    def _lists_match(self):
        if self.eigenvalue_rule == "list":
            if self.eigenvalues is None or len(self.eigenvalues) != self.n_modes:
                raise ValueError("eigenvalue_rule = 'list' needs n_modes eigenvalues")
        if self.noise_rule == "list":
            if self.noise_variances is None or len(self.noise_variances) != self.n_modes:
                raise ValueError("noise_rule = 'list' needs n_modes noise_variances")
        if self.control == "coupled" and self.n_modes < 2:
            raise ValueError("control = 'coupled' needs n_modes >= 2")
        return self


class GridSection(_Section):
    steps: int = Field(1000, ge=2, le=20000)


class ExperimentSection(_Section):
    mu: List[float] = [1.0, 0.1, 0.01, 0.001]
    gamma_fractions: List[float] = [0.4, 0.2, 0.1, 0.05]
    gamma_mu: Optional[float] = Field(None, gt=0)
    paths: int = Field(200, ge=1)
    seed: int = Field(0, ge=0, lt=2**64)
    mode: Literal["stochastic", "deterministic"] = "stochastic"
    target_mean: List[float] = [1.0]
    target_noise_coef: float = 0.0
    target_noise_mode: int = Field(1, ge=1)
    tol: float = Field(1e-8, gt=0)
    max_iter: int = Field(200, ge=1)
    damping: float = Field(1.0, gt=0, le=1)
    blowup_radius: float = Field(1e8, gt=0)
    probes: int = Field(10, ge=1)
    residual_tol: float = Field(1e-2, gt=0)
    radius: float = Field(1.0, gt=0)
    envelope: Literal["stated", "model"] = "stated"
    ku_mu: Optional[float] = Field(None, gt=0)

    @field_validator("mu")
    @classmethod
    def _mu(cls, v):
        if not v:
            raise ValueError("mu must not be empty")
        return _strictly_decreasing(v, "mu")

    @field_validator("gamma_fractions")
    @classmethod
    def _gamma(cls, v):
        if not v or any(not 0 < g < 1 for g in v):
            raise ValueError("gamma_fractions must be a non-empty list in (0, 1)")
        return _strictly_decreasing(v, "gamma_fractions")


class OutputSection(_Section):
    directory: str = "out"
    plots: bool = True
    plot_format: Literal["svg", "png"] = "svg"
    dump_paths: bool = False


class RunConfig(_Section):
    model: ModelSection = ModelSection()
    grid: GridSection = GridSection()
    experiment: ExperimentSection = ExperimentSection()
    output: OutputSection = OutputSection()


def _format_errors(exc):
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_config(data):
    """Validate a mapping (e.g. parsed TOML) into a :class:`RunConfig`."""
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config: {_format_errors(exc)}") from None


def load_config(path):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data)


def dump_config(config):
    return tomli_w.dumps(config.model_dump(mode="json", exclude_none=True))


def config_hash(config):
    return hashlib.sha256(dump_config(config).encode()).hexdigest()


def build_model(section):
    n = section.n_modes
    if section.eigenvalue_rule == "neg_square":
        eig = -np.arange(1, n + 1, dtype=float) ** 2
    else:
        eig = section.eigenvalues
    if section.noise_rule == "inverse_square":
        noise = QWienerSpec.inverse_square(n, section.noise_scale)
    elif section.noise_rule == "constant":
        noise = QWienerSpec(np.full(n, section.noise_scale))
    else:
        noise = QWienerSpec(section.noise_variances)
    kernel = (MemoryKernel.zero() if section.kernel == "zero"
              else MemoryKernel.exponential(section.kernel_amplitude, section.kernel_decay))
    return SpectralModel(
        eigenvalues=eig,
        horizon=section.horizon,
        kernel=kernel,
        control=ControlOperatorSpec(section.control),
        noise=noise,
        nonlinearity=NonlinearitySpec(section.f, section.g, section.zeta),
    )


def build_sweep_config(config):
    exp = config.experiment
    model = build_model(config.model)
    return SweepConfig(
        model=model,
        steps=config.grid.steps,
        mus=tuple(exp.mu),
        paths=exp.paths,
        target=TargetSpec(tuple(exp.target_mean), exp.target_noise_coef, exp.target_noise_mode),
        mode=exp.mode,
        seed=exp.seed,
        options=SolveOptions(tol=exp.tol, max_iter=exp.max_iter, damping=exp.damping,
                             blowup_radius=exp.blowup_radius),
        probes=exp.probes,
    )
