import threading
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loclearn import learner
from loclearn.distributions import (
    BernoulliNoise,
    ConstantTarget,
    SyntheticDistribution,
    random_lipschitz_target,
)
from loclearn.errors import DimensionMismatch, OutOfDomain
from loclearn.learner import (
    TableLabels,
    UnlabeledPool,
    budget_report,
    new_session,
    query,
    query_1d,
    query_dd,
)
from loclearn.lipschitz import lipschitz_audit
from loclearn.partition import from_offsets, locate_many, preprocess


def noisy(L, dims, seed, rate=0.3):
    target = random_lipschitz_target(L, dims, 30, np.random.default_rng(seed))
    return SyntheticDistribution(dims=dims, target=BernoulliNoise(base=target, rate=rate))


def session_for(L, eps, dims, seed, n=2000, cap=80, dist=None):
    dist = dist or noisy(L, dims, seed)
    return new_session(preprocess(L, eps, dims, seed), UnlabeledPool.draw(dist, n, seed), dist, cap)


# construction -------------------------------------------------------------------


def test_empty_pool_answers_through_fallbacks():
    dist = noisy(10, 1, 0)
    s = new_session(from_offsets(10, 0.5, 1, [2]), UnlabeledPool(np.empty((0, 1)), []), dist, 5)
    assert query(s, 0.1) == 0.5  # empty long interval
    assert query(s, 0.25) == 0.5  # interpolation between two empty neighbours
    d2 = noisy(20, 2, 0)
    s2 = new_session(from_offsets(20, 0.4, 2, [2, 2]), UnlabeledPool(np.empty((0, 2)), []), d2, 5)
    assert query(s2, [0.4, 0.4]) == 1.0
    assert budget_report(s2)["distinct_labels"] == 0


def test_buckets_cover_the_pool():
    s = session_for(10, 0.5, 1, 1, n=1000)
    assert sum(len(b) for b in s.buckets.values()) == 1000
    assert budget_report(s)["distinct_labels"] == 0


def test_cap_keeps_earliest_pool_points():
    p = from_offsets(10, 0.5, 1, [2])
    pts = np.array([0.05, 0.95, 0.01, 0.5, 0.15, 0.12, 0.02, 0.03, 0.04, 0.06, 0.07, 0.08])
    pool = UnlabeledPool(pts.reshape(-1, 1), np.zeros(len(pts)))
    s = new_session(p, pool, TableLabels(np.linspace(0, 1, len(pts))), 3)
    fit = s.fit((0,))
    assert fit.points[:, 0].tolist() == [0.05, 0.01, 0.15]
    assert budget_report(s)["distinct_labels"] == 3


def test_dimension_mismatch():
    dist = noisy(20, 2, 0)
    with pytest.raises(DimensionMismatch):
        new_session(from_offsets(10, 0.5, 1, [1]), UnlabeledPool.draw(dist, 10, 0), dist, 5)


def test_out_of_domain_query():
    s = session_for(10, 0.5, 1, 0, n=50)
    with pytest.raises(OutOfDomain):
        query(s, 1.2)


# 1D queries ---------------------------------------------------------------------


def test_constant_labels_give_constant_answers():
    dist = SyntheticDistribution(dims=1, target=ConstantTarget(c=0.37))
    s = session_for(20, 0.5, 1, 4, n=500, dist=dist)
    X = np.linspace(0, 1, 301)
    assert np.allclose(query(s, X), 0.37, atol=1e-12)


def test_repeat_query_hits_the_cache():
    s = session_for(20, 0.5, 1, 2)
    p = s.partition
    x = (p.boundaries[0][0] + p.boundaries[0][1]) / 2  # first interval is long
    first = query_1d(s, x)
    used = s.oracle.distinct_queries
    assert query_1d(s, x) == first
    assert s.oracle.distinct_queries == used


def test_short_interval_midpoint_is_average_of_neighbours():
    s = session_for(20, 0.5, 1, 2)
    edges = s.partition.boundaries[0]
    i = 1  # a short interval with long neighbours on both sides
    lo, hi = edges[i], edges[i + 1]
    v_l = float(learner.evaluate(s.fit((0,)), [lo]))
    v_u = float(learner.evaluate(s.fit((2,)), [hi]))
    assert query_1d(s, (lo + hi) / 2) == pytest.approx((v_l + v_u) / 2, abs=1e-12)


def test_long_query_fetches_its_bucket_only():
    s = session_for(20, 0.5, 1, 5, n=400, cap=10_000)
    edges = s.partition.boundaries[0]
    query_1d(s, (edges[2] + edges[3]) / 2)
    assert budget_report(s)["distinct_labels"] == len(s.buckets[(2,)])


def test_short_query_fetches_both_neighbours():
    s = session_for(20, 0.5, 1, 5, n=400, cap=10_000)
    edges = s.partition.boundaries[0]
    query_1d(s, (edges[3] + edges[4]) / 2)
    expected = len(s.buckets[(2,)]) + len(s.buckets[(4,)])
    assert budget_report(s)["distinct_labels"] == expected
    assert set(budget_report(s)["per_cell"]) == {"2", "4"}


def test_continuity_at_every_boundary():
    s = session_for(50, 0.2, 1, 6, n=5000, cap=100)
    h = 1e-6
    for b in s.partition.boundaries[0][1:-1]:
        assert abs(query_1d(s, b - h) - query_1d(s, b + h)) <= 50 * 2 * h + 1e-6


# d-dimensional queries ----------------------------------------------------------


def test_edge_slab_without_long_neighbour_answers_one():
    p = from_offsets(20, 0.4, 2, [0, 2])  # dim 0 starts with the short slab [0, 0.1]
    dist = noisy(20, 2, 3)
    s = new_session(p, UnlabeledPool.draw(dist, 3000, 3), dist, 100)
    assert query_dd(s, [0.02, 0.1]) == 1.0
    assert s.oracle.distinct_queries == 0


def test_mid_plane_answers_one_exactly():
    p = from_offsets(20, 0.4, 2, [2, 2])
    dist = noisy(20, 2, 3)
    s = new_session(p, UnlabeledPool.draw(dist, 3000, 3), dist, 100)
    assert query_dd(s, [0.25, 0.4]) == 1.0
    # on both sides the owning boxes' extensions reach 1 at the plane
    left = query_dd(s, [0.25 - 1e-9, 0.4])
    right = query_dd(s, [0.25 + 1e-9, 0.4])
    assert abs(left - 1) <= 20 * 1e-9 + 1e-12 and abs(right - 1) <= 20 * 1e-9 + 1e-12


def test_empty_long_box_answers_one():
    p = from_offsets(20, 0.4, 2, [2, 2])
    pts = np.array([[0.05, 0.05]])
    s = new_session(p, UnlabeledPool(pts, [0.0]), TableLabels([0.0]), 5)
    assert query_dd(s, [0.4, 0.4]) == 1.0
    assert query_dd(s, [0.05, 0.05]) == 0.0


def test_fitted_anchors_are_answered_exactly():
    s = session_for(20, 0.4, 2, 8, n=3000, cap=60)
    X = np.random.default_rng(0).random((400, 2))
    idx, long_mask = locate_many(s.partition, X)
    for i in {tuple(int(v) for v in row) for row in idx[long_mask][:20]}:
        fit = s.fit(i)
        if len(fit):
            assert np.array_equal(query_dd(s, fit.points), fit.values)


def test_dd_query_budget_bounded_by_cap():
    s = session_for(20, 0.4, 2, 8, n=3000, cap=25)
    for x in np.random.default_rng(1).random((30, 2)):
        before = s.oracle.distinct_queries
        query_dd(s, x)
        assert s.oracle.distinct_queries - before <= 25


# global properties --------------------------------------------------------------


@settings(max_examples=12, deadline=None)
@given(st.integers(1, 2), st.integers(0, 10**6))
def test_answers_form_one_lipschitz_function(dims, seed):
    L, eps = (40.0, 0.25) if dims == 1 else (20.0, 0.5)
    s = session_for(L, eps, dims, seed, n=1500, cap=50)
    box = (np.zeros(dims), np.ones(dims))
    g = lambda X: query(s, X)  # noqa: E731
    assert lipschitz_audit(g, L, box, 3000, seed) <= 1e-6
    assert lipschitz_audit(g, L, box, 3000, seed + 1, radius=2 / L) <= 1e-6
    vals = query(s, np.random.default_rng(seed).random((500, dims)))
    assert np.all((vals >= 0) & (vals <= 1))


@settings(max_examples=10, deadline=None)
@given(st.integers(1, 2), st.integers(0, 10**6))
def test_answers_do_not_depend_on_query_order(dims, seed):
    L, eps = (40.0, 0.25) if dims == 1 else (20.0, 0.5)
    base = session_for(L, eps, dims, seed, n=1500, cap=50)
    snapshot = learner.to_json(base)
    X = np.random.default_rng(seed).random((200, dims))
    a = learner.from_json(snapshot)
    b = learner.from_json(snapshot)
    forward = np.array([query(a, x) for x in X])
    perm = np.random.default_rng(seed + 1).permutation(len(X))
    backward = np.empty(len(X))
    backward[perm] = query(b, X[perm])
    assert np.array_equal(forward, backward)


def test_concurrent_queries_fetch_each_label_once():
    s = session_for(20, 0.4, 2, 12, n=3000, cap=40)
    X = np.random.default_rng(2).random((400, 2))
    fetched = []
    original = s.oracle.source

    lock = threading.Lock()

    def counting(indices, points, noise):
        with lock:
            fetched.extend(indices.tolist())
        return original(indices, points, noise)

    s.oracle.source = counting
    with ThreadPoolExecutor(8) as ex:
        par = list(ex.map(lambda x: query(s, x), X))
    assert len(fetched) == len(set(fetched)) == s.oracle.distinct_queries
    s.oracle.source = original
    serial = learner.from_json(learner.to_json(s))
    assert np.array_equal(np.array(par), query(serial, X))


def test_checkpoint_round_trip_is_bit_exact():
    s = session_for(50, 0.2, 1, 3, n=3000, cap=60)
    X = np.random.default_rng(0).random(500)
    query(s, X[:100])
    restored = learner.from_json(learner.to_json(s))
    assert restored.oracle.memo == s.oracle.memo
    assert np.array_equal(query(s, X), query(restored, X))
    assert budget_report(restored) == budget_report(s)


def test_budget_is_monotone():
    s = session_for(20, 0.4, 2, 5, n=2000, cap=30)
    last = 0
    for x in np.random.default_rng(0).random((20, 2)):
        query(s, x)
        now = budget_report(s)["distinct_labels"]
        assert now >= last
        last = now
