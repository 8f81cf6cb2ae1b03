"""Local query sessions.

A session binds a partition, an unlabeled pool and a memoising label oracle.
Each long cell is fitted once, on demand, from at most ``sample_cap`` of its
pool points; every later answer reuses that fit, so all answers come from a
single global L-Lipschitz function.

1D sessions (``interp`` partitions) answer short-interval queries by linear
interpolation between the neighbouring long fits. d-dimensional sessions
(``extension`` partitions) answer through a Lipschitz extension of the owning
long box's fit that is pinned to 1 on the middle hyperplanes of the
surrounding short slabs.
"""

import json
import threading
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from loclearn.distributions import SyntheticDistribution
from loclearn.errors import DimensionMismatch, OutOfDomain
from loclearn.lipschitz import (
    AnchoredLipschitzFn,
    ErmProblem,
    ExtensionRule,
    erm_fit,
    evaluate,
    mcshane_extend_constrained,
)
from loclearn.partition import Partition, cell_box, constraint_distance, locate_many, owner_index, CellId, CellKind
from loclearn.rng import stream

CHECKPOINT_SCHEMA = 1
EMPTY_CELL_VALUE_1D = 0.5


@dataclass(frozen=True)
class UnlabeledPool:
    """Pool points plus one pre-drawn uniform per point for label noise."""

    points: np.ndarray
    noise: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        noise = np.array(self.noise, dtype=float).reshape(-1)
        if len(noise) != len(pts):
            raise DimensionMismatch("one noise value per pool point is required")
        if len(pts) and (np.any(pts < 0) or np.any(pts > 1)):
            raise OutOfDomain("pool points must lie in [0, 1]^d")
        pts.setflags(write=False)
        noise.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "noise", noise)

    @property
    def dims(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    @classmethod
    def draw(cls, distribution, n, seed):
        rng = stream(seed, "pool")
        X = distribution.sample_x(n, rng)
        u = rng.random(len(X))
        return cls(X, u, {"seed": int(seed), "n": int(n), "sampler": distribution.marginal.kind})

    @classmethod
    def from_points(cls, points, provenance=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        return cls(pts, np.zeros(len(pts)), provenance or {"sampler": "table"})


class SyntheticLabels:
    """Labels drawn from a synthetic distribution using each point's pre-drawn noise."""

    def __init__(self, distribution):
        self.distribution = distribution

    def __call__(self, indices, points, noise):
        return self.distribution.label(points, noise)

    def to_dict(self):
        return {"kind": "synthetic", "distribution": self.distribution.model_dump(mode="json")}


class TableLabels:
    """Labels looked up from a fixed table aligned with the pool."""

    def __init__(self, labels):
        self.labels = np.asarray(labels, dtype=float).reshape(-1)

    def __call__(self, indices, points, noise):
        return self.labels[indices]

    def to_dict(self):
        return {"kind": "table", "labels": self.labels.tolist()}


def label_source_from_dict(doc):
    if doc["kind"] == "synthetic":
        return SyntheticLabels(SyntheticDistribution.model_validate(doc["distribution"]))
    if doc["kind"] == "table":
        return TableLabels(doc["labels"])
    raise ValueError(f"unknown label source kind {doc['kind']!r}")


class LabelOracle:
    """At-most-once label access to pool points, with accounting."""

    def __init__(self, pool, source):
        self.pool = pool
        self.source = source
        self.memo = {}
        self.per_cell = Counter()
        self.fetch_log = []
        self._lock = threading.Lock()

    @property
    def distinct_queries(self):
        return len(self.memo)

    def fetch(self, indices, tag=None):
        indices = np.asarray(indices, dtype=np.int64).reshape(-1)
        with self._lock:
            new = np.array([i for i in dict.fromkeys(indices.tolist()) if i not in self.memo], dtype=np.int64)
            if len(new):
                labels = np.asarray(self.source(new, self.pool.points[new], self.pool.noise[new]), dtype=float)
                if np.any(labels < 0) or np.any(labels > 1):
                    raise ValueError("label source returned values outside [0, 1]")
                self.memo.update(zip(new.tolist(), labels.tolist()))
                self.per_cell[tag] += len(new)
            self.fetch_log.append((tag, len(new)))
            return np.array([self.memo[i] for i in indices.tolist()])


class QuerySession:
    """Partition + pool + oracle + per-cell fit cache."""

    def __init__(self, partition, pool, oracle, sample_cap, rule=ExtensionRule.MIDPOINT):
        if partition.dims != pool.dims:
            raise DimensionMismatch(f"partition has {partition.dims} dims, pool has {pool.dims}")
        if sample_cap < 1:
            raise ValueError("sample_cap must be >= 1")
        self.partition = partition
        self.pool = pool
        self.oracle = oracle
        self.sample_cap = int(sample_cap)
        self.rule = ExtensionRule(rule)
        self.cell_cache = {}
        self._extensions = {}
        self._locks = {}
        self._guard = threading.Lock()
        self.buckets = _bucket(partition, pool)

    @property
    def is_1d(self):
        return self.partition.scheme == "interp"

    def _cell_lock(self, index):
        with self._guard:
            return self._locks.setdefault(index, threading.Lock())

    def fit(self, index):
        """The cached fit of long cell ``index`` (fetching labels on first use).

        An empty cell yields a function with no anchors.
        """
        index = tuple(int(i) for i in index)
        fn = self.cell_cache.get(index)
        if fn is not None:
            return fn
        with self._cell_lock(index):
            fn = self.cell_cache.get(index)
            if fn is None:
                fn = self._fit(index)
                self.cell_cache[index] = fn
        return fn

    def _fit(self, index):
        p = self.partition
        members = self.buckets.get(index, np.empty(0, dtype=np.int64))[: self.sample_cap]
        if len(members) == 0:
            return AnchoredLipschitzFn(np.empty((0, p.dims)), np.empty(0), p.lipschitz_constant, self.rule)
        labels = self.oracle.fetch(members, tag=_key(index))
        box = cell_box(p, CellId(index, CellKind.LONG_BOX))
        return erm_fit(ErmProblem(self.pool.points[members], labels, p.lipschitz_constant, box), rule=self.rule)

    def extension(self, index):
        index = tuple(int(i) for i in index)
        ext = self._extensions.get(index)
        if ext is None:
            fn = self.fit(index)
            p = self.partition
            cell = CellId(index, CellKind.LONG_BOX)
            ext = mcshane_extend_constrained(
                fn, p.lipschitz_constant, lambda X: constraint_distance(p, cell, X), 1.0, rule=self.rule
            )
            self._extensions[index] = ext
        return ext

    def __call__(self, x):
        return query(self, x)


def _key(index):
    return ",".join(str(i) for i in index)


def _unkey(text):
    return tuple(int(t) for t in text.split(","))


def _bucket(partition, pool):
    if len(pool) == 0:
        return {}
    idx, _ = locate_many(partition, pool.points)
    order = np.lexsort(idx.T[::-1])
    keys, starts = np.unique(idx[order], axis=0, return_index=True)
    groups = np.split(order, starts[1:])
    # pool order inside each bucket, so capping keeps the earliest points
    return {tuple(int(v) for v in k): np.sort(g) for k, g in zip(keys, groups)}


def new_session(partition, pool, label_source, sample_cap, rule=ExtensionRule.MIDPOINT):
    """Bucket the pool by cell; no label is fetched until the first query."""
    if not isinstance(label_source, (SyntheticLabels, TableLabels)) and isinstance(
        label_source, SyntheticDistribution
    ):
        label_source = SyntheticLabels(label_source)
    return QuerySession(partition, pool, LabelOracle(pool, label_source), sample_cap, rule)


def _points(session, x):
    X = np.asarray(x, dtype=float)
    d = session.partition.dims
    single = X.ndim == 0 or (X.ndim == 1 and (d > 1 or X.shape[0] == 1))
    X = X.reshape(-1, d) if X.ndim <= 1 else X
    if X.shape[1] != d:
        raise DimensionMismatch(f"expected {d}-dimensional query points")
    if np.any(~np.isfinite(X)) or np.any(X < 0) or np.any(X > 1):
        raise OutOfDomain("query points must lie in [0, 1]^d")
    return X, single


def _fit_value(session, i, x):
    fn = session.fit((i,))
    if len(fn) == 0:
        return np.full(np.shape(x), EMPTY_CELL_VALUE_1D)
    return evaluate(fn, np.asarray(x, dtype=float).reshape(-1, 1))


def _answer_1d(session, x):
    p = session.partition
    edges, flags = p.boundaries[0], p.is_long[0]
    idx, _ = locate_many(p, x.reshape(-1, 1))
    idx = idx[:, 0]
    out = np.empty(len(x))
    for i in np.unique(idx):
        mask = idx == i
        if flags[i]:
            out[mask] = _fit_value(session, i, x[mask])
            continue
        lo, hi = edges[i], edges[i + 1]
        v_l = v_u = None
        if i - 1 >= 0:
            v_l = float(_fit_value(session, i - 1, [lo])[0])
        if i + 1 < len(flags):
            v_u = float(_fit_value(session, i + 1, [hi])[0])
        v_l = v_u if v_l is None else v_l
        v_u = v_l if v_u is None else v_u
        out[mask] = v_l + (x[mask] - lo) * (v_u - v_l) / (hi - lo)
    return np.clip(out, 0.0, 1.0)


def _answer_dd(session, X):
    idx, ok = owner_index(session.partition, X)
    out = np.ones(len(X))
    if not ok.any():
        return out
    owners = idx[ok]
    keys, inverse = np.unique(owners, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    sub = X[ok]
    vals = np.empty(len(sub))
    for k, key in enumerate(keys):
        mask = inverse == k
        vals[mask] = session.extension(tuple(key))(sub[mask])
    out[ok] = vals
    return out


def query_1d(session, x):
    if not session.is_1d:
        raise DimensionMismatch("query_1d needs a 1D interpolation partition")
    X, single = _points(session, x)
    out = _answer_1d(session, X[:, 0])
    return float(out[0]) if single else out


def query_dd(session, x):
    X, single = _points(session, x)
    out = _answer_dd(session, X)
    return float(out[0]) if single else out


def query(session, x):
    """Answer one point (float) or a batch of points (array)."""
    return query_1d(session, x) if session.is_1d else query_dd(session, x)


def budget_report(session):
    return {
        "distinct_labels": session.oracle.distinct_queries,
        "per_cell": dict(sorted((k, v) for k, v in session.oracle.per_cell.items() if k is not None)),
    }


# checkpoints -----------------------------------------------------------------


def checkpoint_dict(session):
    pool = session.pool
    cells = {}
    for index, fn in sorted(session.cell_cache.items()):
        members = session.buckets.get(index, np.empty(0, dtype=np.int64))[: session.sample_cap]
        cells[_key(index)] = {"members": members.tolist(), "values": fn.values.tolist()}
    return {
        "schema": CHECKPOINT_SCHEMA,
        "partition": session.partition.to_dict(),
        "pool": {"points": pool.points.tolist(), "noise": pool.noise.tolist(), "provenance": pool.provenance},
        "label_source": session.oracle.source.to_dict(),
        "sample_cap": session.sample_cap,
        "rule": session.rule.value,
        "memo": sorted([int(i), y] for i, y in session.oracle.memo.items()),
        "per_cell": dict(session.oracle.per_cell),
        "cells": cells,
    }


def to_json(session):
    return json.dumps(checkpoint_dict(session))


def from_dict(doc):
    if doc.get("schema") != CHECKPOINT_SCHEMA:
        raise ValueError(f"unsupported checkpoint schema {doc.get('schema')!r}")
    partition = Partition.from_dict(doc["partition"])
    pts = np.asarray(doc["pool"]["points"], dtype=float).reshape(-1, partition.dims)
    pool = UnlabeledPool(pts, doc["pool"]["noise"], doc["pool"].get("provenance", {}))
    session = new_session(
        partition, pool, label_source_from_dict(doc["label_source"]), doc["sample_cap"], doc.get("rule", "midpoint")
    )
    session.oracle.memo.update((int(i), float(y)) for i, y in doc["memo"])
    session.oracle.per_cell.update(doc.get("per_cell", {}))
    L = partition.lipschitz_constant
    for key, cell in doc["cells"].items():
        members = np.asarray(cell["members"], dtype=np.int64)
        session.cell_cache[_unkey(key)] = AnchoredLipschitzFn(
            pool.points[members].reshape(-1, partition.dims), cell["values"], L, session.rule
        )
    return session


def from_json(text):
    return from_dict(json.loads(text))
