"""Experiment configuration: a YAML file validated before any computation.

Example::

    function: {name: gfunction, params: {c: [0, 4]}}
    basis: legendre            # or one family per dimension
    truncation: {scheme: max_degree, alpha_max: 4}
    method: [projection, ols]
    sample_sizes: [500, 2000, 10000]
    noise: [0, {times_L: 0.1}]
    n_runs: 100
    seed: 0
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_VERSION = "sobolrisk.config/1"

Family = Literal["legendre", "chebyshev", "trigonometric"]


class ConfigError(ValueError):
    """Unreadable or invalid configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class FunctionConfig(_Strict):
    name: Literal["gfunction", "ishigami", "span_element"]
    params: dict = Field(default_factory=dict)


class TruncationConfig(_Strict):
    scheme: Literal["max_degree", "hyperbolic"]
    alpha_max: int | None = Field(default=None, ge=0)
    q: float | None = Field(default=None, gt=0, le=1)
    t: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _needs_params(self):
        if self.scheme == "max_degree" and self.alpha_max is None:
            raise ValueError("max_degree truncation needs alpha_max")
        if self.scheme == "hyperbolic" and (self.q is None or self.t is None):
            raise ValueError("hyperbolic truncation needs q and t")
        return self


class NoiseConfig(_Strict):
    """Noise standard deviation, either absolute or as a multiple of ``L = sup|f|``."""

    absolute: float | None = Field(default=None, ge=0)
    times_L: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _exactly_one(self):
        if (self.absolute is None) == (self.times_L is None):
            raise ValueError("noise needs exactly one of absolute, times_L")
        return self

    def sigma(self, L: float) -> float:
        return self.absolute if self.absolute is not None else self.times_L * L

    def label(self) -> str:
        return repr(self.absolute) if self.absolute is not None else f"{self.times_L!r}*L"


class ModelConfig(_Strict):
    basis: Union[Family, list[Family]]
    truncation: TruncationConfig


class ExperimentConfig(_Strict):
    function: FunctionConfig
    basis: Union[Family, list[Family]]
    truncation: TruncationConfig
    extra_models: list[ModelConfig] = Field(default_factory=list)
    method: list[Literal["projection", "ols"]] = Field(default_factory=lambda: ["ols"])
    sample_sizes: list[int] = Field(min_length=1)
    noise: list[NoiseConfig] = Field(default_factory=lambda: [NoiseConfig(absolute=0.0)])
    n_runs: int = Field(default=1, ge=1)
    holdout: float = Field(default=0.15, gt=0, lt=1)
    bootstrap_ns: int = Field(default=100, ge=2)
    seed: int = Field(default=0, ge=0, lt=2**64)
    best_error: Literal["quadrature", "sampled"] = "quadrature"
    best_error_n: int = Field(default=10**6, ge=1000)
    checkpoint_block: int = Field(default=25, ge=1)
    output: str = "out"

    @field_validator("method", mode="before")
    @classmethod
    def _listify_method(cls, v):
        return [v] if isinstance(v, str) else v

    @field_validator("noise", mode="before")
    @classmethod
    def _listify_noise(cls, v):
        if not isinstance(v, list):
            v = [v]
        return [{"absolute": x} if isinstance(x, (int, float)) else x for x in v]

    @field_validator("sample_sizes")
    @classmethod
    def _positive_sizes(cls, v):
        if any(n < 1 for n in v):
            raise ValueError("sample sizes must be positive")
        return v

    def models(self) -> list[ModelConfig]:
        return [ModelConfig(basis=self.basis, truncation=self.truncation), *self.extra_models]

    def canonical(self) -> dict:
        """Validated content minus the output location."""
        data = self.model_dump(mode="json")
        data.pop("output")
        return data

    def config_hash(self) -> str:
        text = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config(path, seed: int | None = None, output: str | None = None) -> ExperimentConfig:
    """Read and validate a config file; ``seed`` and ``output`` override the file."""
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    if seed is not None:
        raw["seed"] = seed
    if output is not None:
        raw["output"] = output
    try:
        return ExperimentConfig.model_validate(raw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
