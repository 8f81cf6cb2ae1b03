"""Sample-size formulas with their multiplicative constants exposed.

Every formula is ``multiplier * rate`` and rounded up, with a floor of 1.
The multipliers default to 1; override them per call or through a JSON file
named by the ``LOCLEARN_CONSTANTS`` environment variable.
"""

import json
import math
import os

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from loclearn.errors import ConfigError

ENV_VAR = "LOCLEARN_CONSTANTS"


class Constants(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_multiplier: float = Field(1.0, gt=0, description="evaluation draws: c * 1/eps^2")
    pool_multiplier: float = Field(1.0, gt=0, description="unlabeled pool size")
    cap_multiplier: float = Field(1.0, gt=0, description="per-long-cell label cap")
    m_multiplier: float = Field(1.0, gt=0, description="NW draws: c * (d ln(1/eps) + ln(1/delta)) / eps^2")

    def n_eval(self, epsilon):
        return _ceil(self.n_multiplier / epsilon**2)

    def pool_size(self, L, epsilon, dims):
        log = math.log(1.0 / epsilon)
        if dims == 1:
            rate = L / epsilon**4 * log
        else:
            rate = (L / epsilon) ** dims / epsilon**3 * log
        return _ceil(self.pool_multiplier * rate)

    def sample_cap(self, epsilon, dims):
        log = math.log(1.0 / epsilon)
        if dims == 1:
            rate = log / (2.0 * epsilon**4)
        else:
            rate = (dims / epsilon**2) ** dims * log / epsilon**2
        return _ceil(self.cap_multiplier * rate)

    def nw_draws(self, epsilon, delta, dims):
        return _ceil(self.m_multiplier * (dims * math.log(1.0 / epsilon) + math.log(1.0 / delta)) / epsilon**2)


def _ceil(x):
    # guard against 5.000000000001 style round-up
    return max(1, math.ceil(x - 1e-9))


def load_constants(overrides=None, env=None):
    """Defaults, then the env-var JSON file, then explicit ``overrides``."""
    env = os.environ if env is None else env
    values = {}
    path = env.get(ENV_VAR)
    if path:
        try:
            with open(path) as fh:
                values.update(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {ENV_VAR} file {path!r}: {exc}", [(ENV_VAR, str(exc))]) from exc
    if isinstance(overrides, Constants):
        overrides = overrides.model_dump()
    values.update(overrides or {})
    try:
        return Constants(**values)
    except ValidationError as exc:
        errors = [(".".join(str(p) for p in e["loc"]), e["msg"]) for e in exc.errors()]
        raise ConfigError("invalid constants", errors) from exc
