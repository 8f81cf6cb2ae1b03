"""Experiment configuration."""

import json
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from loclearn.constants import Constants
from loclearn.distributions import (
    BernoulliNoise,
    ConstantTarget,
    MixtureX,
    SyntheticDistribution,
    ThresholdTarget,
    random_lipschitz_target,
)
from loclearn.errors import ConfigError
from loclearn.nw import KdeMode

MODES = ("LOCAL_QUERY", "ERROR_EST", "NW_EST", "PROPERTY_SUITE")
Preset = Literal["realizable", "pure_noise", "clusters"]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["LOCAL_QUERY", "ERROR_EST", "NW_EST", "PROPERTY_SUITE"]
    L: float = Field(50.0, gt=0)
    epsilon: float = Field(0.2, gt=0, le=1)
    dims: int = Field(1, ge=1)
    seeds: List[int] = Field(min_length=1)
    constants: Constants = Field(default_factory=Constants)
    preset: Optional[Preset] = None
    distribution: Optional[SyntheticDistribution] = None
    target_seed: int = 0
    target_anchors: int = Field(64, ge=1)
    delta: float = Field(0.1, gt=0, lt=1)
    N: int = Field(200, ge=1)
    data: Optional[str] = None
    kde_mode: str = "exact"
    n_baseline: int = Field(10_000, ge=1)
    n_queries: int = Field(1_000, ge=1)
    timing: bool = False
    workers: int = Field(1, ge=1)
    output: Optional[str] = None

    @field_validator("mode", mode="before")
    @classmethod
    def _upper(cls, v):
        return v.upper().replace("-", "_") if isinstance(v, str) else v

    @field_validator("kde_mode")
    @classmethod
    def _kde(cls, v):
        return str(KdeMode.parse(v))

    @model_validator(mode="after")
    def _dims_agree(self):
        if self.distribution is not None and self.distribution.dims != self.dims:
            raise ValueError(f"distribution.dims={self.distribution.dims} but dims={self.dims}")
        return self


def parse_config(doc):
    """Validate a config mapping; errors become ``ConfigError`` with per-field messages."""
    try:
        return ExperimentConfig.model_validate(doc)
    except ValidationError as exc:
        errors = [(".".join(str(p) for p in e["loc"]) or "config", e["msg"]) for e in exc.errors()]
        detail = "; ".join(f"{f}: {m}" for f, m in errors)
        raise ConfigError(f"invalid experiment config: {detail}", errors) from exc


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}", [("config", str(exc))]) from exc
    return parse_config(doc)


def preset_distribution(preset, L, dims, target_seed=0, target_anchors=64):
    if preset == "realizable":
        target = random_lipschitz_target(L, dims, target_anchors, np.random.default_rng(target_seed))
        return SyntheticDistribution(dims=dims, target=target)
    if preset == "pure_noise":
        return SyntheticDistribution(dims=dims, target=BernoulliNoise(base=ConstantTarget(c=0.5), rate=1.0))
    if preset == "clusters":
        rng = np.random.default_rng(target_seed)
        centers = rng.uniform(0.15, 0.85, size=(4, dims))
        lo = np.clip(centers - 0.12, 0, 1)
        hi = np.clip(centers + 0.12, 0, 1)
        return SyntheticDistribution(
            dims=dims,
            marginal=MixtureX(boxes_lo=lo.tolist(), boxes_hi=hi.tolist()),
            target=BernoulliNoise(base=ThresholdTarget(dim=0, cut=0.5), rate=0.2),
        )
    raise ConfigError(f"unknown preset {preset!r}", [("preset", "unknown")])


def config_distribution(cfg):
    if cfg.distribution is not None:
        return cfg.distribution
    preset = cfg.preset or ("clusters" if cfg.mode == "NW_EST" else "realizable")
    return preset_distribution(preset, cfg.L, cfg.dims, cfg.target_seed, cfg.target_anchors)
