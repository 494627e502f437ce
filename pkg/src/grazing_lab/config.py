"""Experiment configuration: pydantic schema, YAML loading, object builders.

Configs are strict: unknown keys are rejected and error messages carry the
full key path.  Every run embeds the resolved config (JSON) in its output
header, so a CSV can be reproduced from its own preamble.
"""

from __future__ import annotations

from typing import Literal, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .densities import (DensityModel, GaussianComponent, anisotropic_gaussian,
                        correlated_mixture, maxwellian_factorized,
                        standard_gaussian)
from .dualpairs import DualPair, get_pair
from .kernels import (KernelSet, KineticKernel, SpatialKernel, power_law_beta)
from .quadrature import SamplerConfig


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ComponentSpec(_Strict):
    mean_x: list[float]
    mean_v: list[float]
    var_x: Union[float, list[float]] = 1.0
    var_v: Union[float, list[float]] = 1.0
    weight: float = 1.0


class DensitySpec(_Strict):
    preset: Optional[Literal["standard", "maxwellian", "anisotropic",
                             "correlated_mixture"]] = None
    dim: int = 2
    components: Optional[list[ComponentSpec]] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.components is None):
            raise ValueError("specify exactly one of preset/components")
        return self


class A0Spec(_Strict):
    form: Literal["power", "bracket"] = "power"
    gamma: float = 0.0
    c: float = 1.0


class BetaSpec(_Strict):
    profile: Literal["power_law"] = "power_law"
    nu: float = 0.5


class KappaSpec(_Strict):
    form: Literal["constant", "exp_bracket", "power_bracket"] = "constant"
    c: float = 1.0
    alpha: float = 1.0


class KernelSpec(_Strict):
    a0: A0Spec = Field(default_factory=A0Spec)
    beta: BetaSpec = Field(default_factory=BetaSpec)
    kappa: KappaSpec = Field(default_factory=KappaSpec)
    epsilon: float = 1.0
    dim: int = 2


class PairSpec(_Strict):
    name: Literal["quadratic", "cosh", "custom"] = "cosh"
    custom_name: Optional[str] = None


class MCSpec(_Strict):
    samples: int = 200_000
    seed: int = 0
    workers: int = 1
    chunk: int = 1 << 19


class OracleSpec(_Strict):
    enabled: bool = True
    L: float = 8.0
    resolution: int = 32


class SolverSpec(_Strict):
    n: int = 1000
    dt: float = 0.005
    horizon: float = 1.0
    theta_min: Optional[float] = None
    seed: int = 0
    trace_every: Optional[int] = None
    entropy: bool = True


class ExperimentConfig(_Strict):
    density: DensitySpec = Field(default_factory=lambda: DensitySpec(preset="anisotropic"))
    kernels: KernelSpec = Field(default_factory=KernelSpec)
    pair: PairSpec = Field(default_factory=PairSpec)
    mc: MCSpec = Field(default_factory=MCSpec)
    oracle: OracleSpec = Field(default_factory=OracleSpec)
    solver: Optional[SolverSpec] = None


class ConfigError(ValueError):
    """Schema violation with dotted key paths."""


def format_validation_error(err: ValidationError) -> str:
    lines = []
    for item in err.errors():
        path = ".".join(str(p) for p in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "\n".join(lines)


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data or {})
    except ValidationError as err:
        raise ConfigError(format_validation_error(err)) from err


def load_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        data = yaml.safe_load(fh)
    if data is not None and not isinstance(data, dict):
        raise ConfigError("<root>: config must be a mapping")
    return parse_config(data)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_density(spec: DensitySpec) -> DensityModel:
    if spec.preset == "standard":
        return standard_gaussian(spec.dim)
    if spec.preset == "maxwellian":
        return maxwellian_factorized(spec.dim)
    if spec.preset == "anisotropic":
        v_diag = [1.0, 4.0][: spec.dim] if spec.dim == 2 else [1.0, 4.0, 1.0]
        return anisotropic_gaussian(spec.dim, tuple(v_diag))
    if spec.preset == "correlated_mixture":
        return correlated_mixture(spec.dim)
    comps = [
        GaussianComponent.make(np.asarray(c.mean_x), np.asarray(c.mean_v),
                               np.asarray(c.var_x), np.asarray(c.var_v), c.weight)
        for c in spec.components
    ]
    return DensityModel(comps)


def build_kernels(spec: KernelSpec) -> KernelSet:
    if spec.a0.form == "power":
        a0 = KineticKernel("power", spec.a0.gamma)
    else:
        a0 = KineticKernel("bracket", spec.a0.gamma, spec.a0.c, spec.a0.c)
    return KernelSet(
        a0=a0,
        beta=power_law_beta(spec.beta.nu, spec.dim),
        kappa=SpatialKernel(spec.kappa.form, spec.kappa.c, spec.kappa.alpha),
        epsilon=spec.epsilon,
        dim=spec.dim,
    )


def build_pair(spec: PairSpec) -> DualPair:
    return get_pair(spec.name, spec.custom_name)


def build_sampler(spec: MCSpec) -> SamplerConfig:
    return SamplerConfig(n_samples=spec.samples, seed=spec.seed,
                         workers=spec.workers, chunk_size=spec.chunk)
