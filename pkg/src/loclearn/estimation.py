"""Estimating the best achievable L1 error of the Lipschitz class.

``estimate_error`` answers ``N = ceil(c/eps^2)`` fresh labelled draws through a
local query session and averages the absolute residuals. ``oracle_error``
is the full-information baseline: one global ERM over a labelled set.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from loclearn.constants import load_constants
from loclearn.errors import EmptyInput
from loclearn.learner import UnlabeledPool, budget_report, new_session, query
from loclearn.lipschitz import ErmProblem, erm_fit
from loclearn.partition import preprocess
from loclearn.rng import stream


@dataclass(frozen=True)
class ErrorEstimate:
    value: float
    epsilon: float
    n_fresh_labels: int
    n_pool_labels: int
    seed: int
    L: float
    dims: int
    pool_size: int
    sample_cap: int
    constants: dict = field(default_factory=dict)

    def to_dict(self):
        doc = asdict(self)
        doc["estimate"] = doc.pop("value")
        return doc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def estimate_error(L, epsilon, dims, data_distribution, rng_seed, constants=None, return_session=False):
    """Local-learner estimate of ``min_f E|y - f(x)|`` to additive ``epsilon``.

    Raises ``DegenerateScale`` when no partition exists at this scale.
    """
    consts = load_constants(constants)
    seed = int(rng_seed)
    partition = preprocess(L, epsilon, dims, seed)
    pool_size = consts.pool_size(L, epsilon, dims)
    cap = consts.sample_cap(epsilon, dims)
    pool = UnlabeledPool.draw(data_distribution, pool_size, seed)
    session = new_session(partition, pool, data_distribution, cap)
    n = consts.n_eval(epsilon)
    X, y = data_distribution.sample(n, stream(seed, "eval"))
    residuals = np.abs(np.asarray(query(session, X)).reshape(-1) - y)
    est = ErrorEstimate(
        value=float(np.clip(residuals.mean(), 0.0, 1.0)),
        epsilon=float(epsilon),
        n_fresh_labels=int(n),
        n_pool_labels=budget_report(session)["distinct_labels"],
        seed=seed,
        L=float(L),
        dims=int(dims),
        pool_size=pool_size,
        sample_cap=cap,
        constants=consts.model_dump(),
    )
    return (est, session) if return_session else est


def oracle_error(L, dims, points, labels):
    """Mean absolute training error of the global ERM on a labelled set."""
    labels = np.asarray(labels, dtype=float).reshape(-1)
    if len(labels) == 0:
        raise EmptyInput("oracle_error needs a non-empty dataset")
    points = np.asarray(points, dtype=float).reshape(len(labels), int(dims))
    problem = ErmProblem(points, labels, L)
    fn = erm_fit(problem)
    return problem.objective(fn.values) / len(labels)


def oracle_dataset(distribution, n, seed):
    """Labelled draw for the baseline, on its own random stream."""
    return distribution.sample(n, stream(seed, "oracle"))
