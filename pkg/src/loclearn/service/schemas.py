"""Request and response bodies for the HTTP service."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from loclearn.config import Preset
from loclearn.distributions import SyntheticDistribution


class _Body(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PreprocessRequest(_Body):
    L: float = Field(gt=0)
    epsilon: float = Field(gt=0, le=1)
    dims: int = Field(1, ge=1)
    seed: int = 0
    scheme: Optional[str] = None


class DataSource(_Body):
    """Where labels come from: a synthetic distribution (explicit or preset) or a table."""

    preset: Optional[Preset] = None
    distribution: Optional[SyntheticDistribution] = None
    target_seed: int = 0
    target_anchors: int = Field(64, ge=1)
    constants: Dict[str, float] = Field(default_factory=dict)


class SessionCreate(PreprocessRequest, DataSource):
    points: Optional[List[List[float]]] = None
    labels: Optional[List[float]] = None
    pool_size: Optional[int] = Field(None, ge=0)
    sample_cap: Optional[int] = Field(None, ge=1)


class SessionInfo(_Body):
    session_id: str
    dims: int
    pool_size: int
    sample_cap: int
    partition: Dict[str, Any]


class RestoreRequest(_Body):
    checkpoint: Dict[str, Any]


class QueryRequest(_Body):
    points: List[List[float]] = Field(min_length=1)


class QueryResponse(_Body):
    values: List[float]
    distinct_labels: int


class BudgetResponse(_Body):
    distinct_labels: int
    per_cell: Dict[str, int]


class EstimateRequest(PreprocessRequest, DataSource):
    pass


class ErrorEstimateBody(_Body):
    estimate: float
    epsilon: float
    n_fresh_labels: int
    n_pool_labels: int
    seed: int
    L: float
    dims: int
    pool_size: int
    sample_cap: int
    constants: Dict[str, float]


class NwRequest(DataSource):
    epsilon: float = Field(gt=0, le=1)
    delta: float = Field(0.1, gt=0, lt=1)
    seed: int = 0
    kde_mode: str = "exact"
    dims: int = Field(1, ge=1)
    N: int = Field(200, ge=1)
    points: Optional[List[List[float]]] = None
    labels: Optional[List[float]] = None


class NwEstimateBody(_Body):
    value: float
    argmin_eigenvalues: List[float]
    n_labels: int
    net_size: int
    seed: int
    kde_mode: str
    M: int
    N: int
    epsilon: float
    delta: float
    max_summand: float
    summand_bound: float
    note: str


class ExperimentRequest(_Body):
    config: Dict[str, Any]


class ExperimentResponse(_Body):
    passed: bool
    columns: List[str]
    rows: List[Dict[str, Any]]
    csv: str


class PropertiesRequest(_Body):
    seed: int = 0
    checks: Optional[List[str]] = None


class PropertiesResponse(_Body):
    passed: bool
    checks: List[Dict[str, Any]]


class ErrorBody(_Body):
    error: str
    detail: str
    errors: List[List[str]] = Field(default_factory=list)
