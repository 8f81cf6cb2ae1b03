"""Active local learning and distance estimation for bounded Lipschitz classes.

The package is organised bottom-up:

* :mod:`loclearn.lipschitz` -- anchored Lipschitz functions, L1 ERM, McShane extensions
* :mod:`loclearn.partition` -- random-offset long/short partitions
* :mod:`loclearn.learner` -- query sessions (local predictions with a label budget)
* :mod:`loclearn.estimation` -- error estimation through the local learner
* :mod:`loclearn.nw` -- Nadaraya-Watson error estimation over diagonal transforms
* :mod:`loclearn.experiments` -- synthetic experiments and the property suite
* :mod:`loclearn.service` -- FastAPI service; :mod:`loclearn.cli` is its client
"""

from loclearn.errors import (
    ConfigError,
    DegenerateScale,
    DimensionMismatch,
    EmptyDataset,
    EmptyInput,
    InconsistentConstraints,
    InvalidEpsilon,
    InvalidLabel,
    LoclearnError,
    NotLongBox,
    OutOfDomain,
    PreconditionViolated,
)
from loclearn.lipschitz import (
    AnchoredLipschitzFn,
    ErmProblem,
    ExtensionRule,
    erm_fit,
    evaluate,
    lipschitz_audit,
    mcshane_extend_constrained,
)
from loclearn.partition import CellId, CellKind, Partition, locate, preprocess

__version__ = "0.1.0"

__all__ = [
    "AnchoredLipschitzFn",
    "CellId",
    "CellKind",
    "ConfigError",
    "DegenerateScale",
    "DimensionMismatch",
    "EmptyDataset",
    "EmptyInput",
    "ErmProblem",
    "ExtensionRule",
    "InconsistentConstraints",
    "InvalidEpsilon",
    "InvalidLabel",
    "LoclearnError",
    "NotLongBox",
    "OutOfDomain",
    "Partition",
    "PreconditionViolated",
    "erm_fit",
    "evaluate",
    "lipschitz_audit",
    "locate",
    "mcshane_extend_constrained",
    "preprocess",
]
