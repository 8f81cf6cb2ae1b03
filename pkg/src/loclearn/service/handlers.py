"""Service logic, independent of the web framework."""

import threading
import uuid

import numpy as np

from loclearn import learner
from loclearn.config import preset_distribution
from loclearn.constants import load_constants
from loclearn.distributions import PointSetX, SyntheticDistribution
from loclearn.errors import ConfigError
from loclearn.estimation import estimate_error
from loclearn.experiments import run_experiment
from loclearn.nw import NwDataset, nw_error
from loclearn.partition import preprocess
from loclearn.properties import run_properties
from loclearn.service import schemas


class SessionStore:
    """In-memory sessions keyed by id."""

    def __init__(self):
        self._sessions = {}
        self._lock = threading.Lock()

    def add(self, session):
        sid = uuid.uuid4().hex
        with self._lock:
            self._sessions[sid] = session
        return sid

    def get(self, sid):
        with self._lock:
            session = self._sessions.get(sid)
        if session is None:
            raise KeyError(sid)
        return session

    def drop(self, sid):
        with self._lock:
            self._sessions.pop(sid, None)


def _distribution(req, L, dims):
    if req.distribution is not None:
        if req.distribution.dims != dims:
            raise ConfigError("distribution dims do not match", [("distribution.dims", "mismatch")])
        return req.distribution
    return preset_distribution(req.preset or "realizable", L, dims, req.target_seed, req.target_anchors)


def do_preprocess(req):
    return preprocess(req.L, req.epsilon, req.dims, req.seed, req.scheme).to_dict()


def create_session(req, store):
    consts = load_constants(req.constants)
    partition = preprocess(req.L, req.epsilon, req.dims, req.seed, req.scheme)
    if req.points is not None:
        pts = np.asarray(req.points, dtype=float).reshape(len(req.points), -1)
        pool = learner.UnlabeledPool.from_points(pts, {"sampler": "table", "n": len(pts)})
        if req.labels is None:
            source = learner.SyntheticLabels(_distribution(req, req.L, req.dims))
        else:
            if len(req.labels) != len(pts):
                raise ConfigError("one label per pool point is required", [("labels", "length mismatch")])
            source = learner.TableLabels(req.labels)
    else:
        dist = _distribution(req, req.L, req.dims)
        n = req.pool_size if req.pool_size is not None else consts.pool_size(req.L, req.epsilon, req.dims)
        pool = learner.UnlabeledPool.draw(dist, n, req.seed)
        source = learner.SyntheticLabels(dist)
    cap = req.sample_cap or consts.sample_cap(req.epsilon, req.dims)
    session = learner.new_session(partition, pool, source, cap)
    return _info(store.add(session), session)


def _info(sid, session):
    return schemas.SessionInfo(
        session_id=sid,
        dims=session.partition.dims,
        pool_size=len(session.pool),
        sample_cap=session.sample_cap,
        partition=session.partition.to_dict(),
    )


def restore_session(req, store):
    session = learner.from_dict(req.checkpoint)
    return _info(store.add(session), session)


def query_session(sid, req, store):
    session = store.get(sid)
    values = learner.query(session, np.asarray(req.points, dtype=float).reshape(len(req.points), -1))
    return schemas.QueryResponse(
        values=np.atleast_1d(values).tolist(), distinct_labels=session.oracle.distinct_queries
    )


def budget(sid, store):
    return schemas.BudgetResponse(**learner.budget_report(store.get(sid)))


def checkpoint(sid, store):
    return learner.checkpoint_dict(store.get(sid))


def do_estimate(req):
    dist = _distribution(req, req.L, req.dims)
    est = estimate_error(req.L, req.epsilon, req.dims, dist, req.seed, req.constants)
    return schemas.ErrorEstimateBody(**est.to_dict())


def do_nw(req):
    if req.points is not None:
        if req.labels is None:
            raise ConfigError("an NW dataset needs labels", [("labels", "missing")])
        pts = np.asarray(req.points, dtype=float).reshape(len(req.points), -1)
        dataset = NwDataset.from_labels(pts, req.labels)
        dist = req.distribution or SyntheticDistribution(
            dims=pts.shape[1],
            marginal=PointSetX(points=pts.tolist(), labels=list(map(float, req.labels))),
            target={"kind": "constant", "c": 0.0},
        )
    else:
        dist = req.distribution or preset_distribution(req.preset or "clusters", 1.0, req.dims, req.target_seed)
        dataset = NwDataset.draw(dist, req.N, req.seed)
    est = nw_error(dataset, dist, req.epsilon, req.delta, req.seed, req.kde_mode, req.constants)
    return schemas.NwEstimateBody(**est.to_dict())


def do_experiment(req):
    result = run_experiment(req.config)
    return schemas.ExperimentResponse(
        passed=result.passed, columns=result.columns, rows=result.rows, csv=result.to_csv()
    )


def do_properties(req):
    rows = run_properties(req.seed, req.checks)
    return schemas.PropertiesResponse(passed=all(r["passed"] for r in rows), checks=rows)
