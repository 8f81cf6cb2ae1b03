import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loclearn.errors import EmptyInput, InconsistentConstraints, OutOfDomain
from loclearn.lipschitz import (
    AnchoredLipschitzFn,
    ErmProblem,
    ExtensionRule,
    erm_fit,
    evaluate,
    lipschitz_audit,
    max_pair_violation,
    mcshane_extend_constrained,
)

from oracles import grid_erm_optimum, mcshane

RULES = ["upper", "lower", "midpoint"]


def objective(points, labels, L):
    prob = ErmProblem(points, labels, L)
    return prob.objective(erm_fit(prob).values)


# erm_fit ----------------------------------------------------------------------


def test_single_sample_is_unconstrained():
    f = erm_fit(ErmProblem([[0.5]], [0.7], 3))
    assert f.values.tolist() == [0.7]
    assert f.points.tolist() == [[0.5]]


def test_labels_already_lipschitz_fit_exactly():
    f = erm_fit(ErmProblem([[0.0], [1.0]], [0.0, 1.0], 1))
    assert np.allclose(f.values, [0.0, 1.0], atol=1e-9)


def test_two_close_points_pay_the_gap():
    # independent value-grid search at step 1e-3 gives 0.8
    assert grid_erm_optimum([[0.0], [0.1]], [0.0, 1.0], 2, 1e-3) == pytest.approx(0.8, abs=1e-9)
    assert objective([[0.0], [0.1]], [0.0, 1.0], 2) == pytest.approx(0.8, abs=1e-6)


def test_default_rule_is_midpoint():
    assert erm_fit(ErmProblem([[0.2]], [0.1], 1)).rule is ExtensionRule.MIDPOINT


def test_empty_input_rejected():
    with pytest.raises(EmptyInput):
        erm_fit(ErmProblem(np.empty((0, 1)), [], 1))


def test_points_outside_domain_rejected():
    with pytest.raises(OutOfDomain):
        ErmProblem([[1.5]], [0.2], 1)


def test_zero_lipschitz_constant_gives_lower_median():
    f = erm_fit(ErmProblem([[0.1], [0.2], [0.3], [0.4]], [0.9, 0.1, 0.3, 0.6], 0))
    assert np.all(f.values == 0.3)


def test_coincident_points_with_opposite_labels():
    assert objective([[0.4], [0.4]], [0.0, 1.0], 10) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("dims", [1, 2])
def test_matches_value_grid_search(dims):
    rng = np.random.default_rng(11 + dims)
    for _ in range(25):
        n = int(rng.integers(1, 6))
        pts, y, L = rng.random((n, dims)), rng.random(n), float(rng.uniform(0.5, 8))
        got = objective(pts, y, L)
        ref = grid_erm_optimum(pts, y, L, 0.02)
        assert got <= ref + 1e-6
        assert abs(got - ref) <= 0.05


def test_five_random_points_at_L4():
    rng = np.random.default_rng(4)
    pts, y = rng.random((5, 1)), rng.random(5)
    assert abs(objective(pts, y, 4) - grid_erm_optimum(pts, y, 4, 0.02)) <= 0.05


def test_one_dimensional_adjacent_constraints_suffice_for_all_pairs():
    rng = np.random.default_rng(2)
    pts, y = rng.random((300, 1)), rng.random(300)
    f = erm_fit(ErmProblem(pts, y, 7))
    D = np.abs(pts - pts.T)
    assert np.max(np.abs(f.values[:, None] - f.values[None, :]) - 7 * D) <= 1e-9


def test_far_pairs_are_implied_in_two_dimensions():
    rng = np.random.default_rng(3)
    pts, y = rng.random((150, 2)), rng.random(150)
    f = erm_fit(ErmProblem(pts, y, 4))
    D = np.abs(pts[:, None, :] - pts[None, :, :]).max(axis=2)
    assert np.max(np.abs(f.values[:, None] - f.values[None, :]) - 4 * D) <= 1e-9


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 40),
    st.integers(1, 3),
    st.floats(0.0, 30.0),
    st.integers(0, 2**32 - 1),
)
def test_fit_is_consistent_and_in_range(n, dims, L, seed):
    rng = np.random.default_rng(seed)
    pts, y = rng.random((n, dims)), rng.random(n)
    f = erm_fit(ErmProblem(pts, y, L))
    assert np.all((f.values >= 0) & (f.values <= 1))
    assert max_pair_violation(f.points, f.values, L) <= 1e-9
    # never worse than the best constant
    assert np.abs(y - f.values).sum() <= np.abs(y - np.median(y)).sum() + 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 30), st.integers(1, 2), st.floats(0.1, 10), st.floats(0.1, 10), st.integers(0, 2**32 - 1))
def test_objective_is_monotone_in_L(n, dims, L1, L2, seed):
    L1, L2 = sorted((L1, L2))
    rng = np.random.default_rng(seed)
    pts, y = rng.random((n, dims)), rng.random(n)
    assert objective(pts, y, L1) >= objective(pts, y, L2) - 1e-6


# evaluate ---------------------------------------------------------------------


def test_upper_extension_grows_linearly():
    f = AnchoredLipschitzFn([[0.0]], [0.0], 1, "upper")
    assert evaluate(f, [0.3]) == pytest.approx(0.3)


def test_symmetric_midpoint():
    f = AnchoredLipschitzFn([[0.0], [1.0]], [0.5, 0.5], 1, "midpoint")
    assert evaluate(f, [0.5]) == pytest.approx(0.5)


@pytest.mark.parametrize("rule, expected", [("upper", 0.5), ("lower", 0.0), ("midpoint", 0.25)])
def test_three_rules_between_two_zero_anchors(rule, expected):
    f = AnchoredLipschitzFn([[0.0], [1.0]], [0.0, 0.0], 1, rule)
    assert evaluate(f, [0.5]) == pytest.approx(expected)


def test_anchor_values_returned_exactly():
    rng = np.random.default_rng(5)
    for dims in (1, 2):
        pts = rng.random((30, dims))
        f = erm_fit(ErmProblem(pts, rng.random(30), 3))
        for rule in RULES:
            assert np.array_equal(evaluate(f.with_rule(rule), pts), f.values)


def test_duplicate_points_with_equal_values_accepted():
    f = AnchoredLipschitzFn([[0.2, 0.2], [0.2, 0.2]], [0.4, 0.4], 1)
    assert evaluate(f, [0.2, 0.2]) == 0.4


def test_duplicate_points_with_unequal_values_rejected():
    with pytest.raises(InconsistentConstraints):
        AnchoredLipschitzFn([[0.2], [0.2]], [0.4, 0.5], 1)


def test_inconsistent_anchors_rejected():
    with pytest.raises(InconsistentConstraints):
        AnchoredLipschitzFn([[0.0], [0.1]], [0.0, 1.0], 2)


def test_anchor_values_must_lie_in_unit_interval():
    with pytest.raises(InconsistentConstraints):
        AnchoredLipschitzFn([[0.0]], [1.2], 2)


def test_evaluate_is_total_on_the_cube():
    f = AnchoredLipschitzFn([[0.5, 0.5]], [0.9], 10, "upper")
    assert evaluate(f, [0.0, 1.0]) == 1.0


@pytest.mark.parametrize("dims", [1, 2, 3])
def test_evaluate_matches_brute_force(dims):
    rng = np.random.default_rng(dims)
    pts = rng.random((15, dims))
    f = erm_fit(ErmProblem(pts, rng.random(15), 4))
    X = rng.random((50, dims))
    for rule in RULES:
        got = evaluate(f.with_rule(rule), X)
        ref = [mcshane(f.points, f.values, 4, x, rule) for x in X]
        assert np.allclose(got, ref, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 25), st.integers(1, 3), st.floats(0.5, 20), st.integers(0, 2**32 - 1))
def test_envelopes_ordered_and_lipschitz(n, dims, L, seed):
    rng = np.random.default_rng(seed)
    f = erm_fit(ErmProblem(rng.random((n, dims)), rng.random(n), L))
    X = rng.random((300, dims))
    assert np.all(evaluate(f.with_rule("upper"), X) >= evaluate(f.with_rule("lower"), X) - 1e-12)
    box = (np.zeros(dims), np.ones(dims))
    for rule in RULES:
        g = f.with_rule(rule)
        assert lipschitz_audit(g, L, box, 2000, seed) <= 1e-9
        assert lipschitz_audit(g, L, box, 2000, seed, radius=1 / L) <= 1e-9


def test_all_rules_pass_audit_on_ten_thousand_pairs():
    rng = np.random.default_rng(9)
    f = erm_fit(ErmProblem(rng.random((40, 2)), rng.random(40), 6))
    for rule in RULES:
        assert lipschitz_audit(f.with_rule(rule), 6, ([0, 0], [1, 1]), 10_000, 1) <= 1e-9


# constrained extension --------------------------------------------------------


def plane_distance(X):
    return np.abs(np.asarray(X).reshape(-1, 1)[:, 0] - 0.9)


def test_constrained_extension_without_anchors_is_the_constant():
    g = mcshane_extend_constrained((np.empty((0, 2)), []), 5, lambda X: np.full(len(X), np.inf), 1.0)
    assert np.all(g(np.random.default_rng(0).random((20, 2))) == 1.0)
    g = mcshane_extend_constrained((np.empty((0, 1)), []), 5, plane_distance, 1.0)
    assert g([0.9]) == 1.0


def test_constrained_extension_single_anchor():
    g = mcshane_extend_constrained(([[0.5]], [0.4]), 2, plane_distance, 1.0)
    assert g([0.9]) == 1.0
    assert g([0.5]) == 0.4
    assert lipschitz_audit(g, 2, ([0.0], [1.0]), 1000, 0) <= 1e-9


def test_constraint_at_exactly_one_over_L():
    L = 10.0
    dist = lambda X: np.abs(np.asarray(X)[:, 0] - 0.6)  # noqa: E731
    g = mcshane_extend_constrained(([[0.5, 0.5]], [0.0]), L, dist, 1.0, rule="midpoint")
    assert g([0.5, 0.5]) == 0.0
    assert g([0.6, 0.3]) == 1.0


def test_constrained_extension_equals_value_on_constraint_set():
    rng = np.random.default_rng(1)
    pts = rng.uniform(0.2, 0.6, size=(10, 2))
    f = erm_fit(ErmProblem(pts, rng.random(10), 3))
    dist = lambda X: np.abs(np.asarray(X).reshape(-1, 2)[:, 0] - 0.95)  # noqa: E731
    for rule in RULES:
        g = mcshane_extend_constrained(f, 3, dist, 0.7, rule=rule)
        on = np.column_stack([np.full(100, 0.95), rng.random(100)])
        assert np.all(g(on) == 0.7)
        assert np.array_equal(g(pts), f.values)


def test_inconsistent_constraint_detected():
    with pytest.raises(InconsistentConstraints):
        mcshane_extend_constrained(([[0.5]], [0.0]), 2, plane_distance, 1.0)


# audit ------------------------------------------------------------------------


def test_audit_of_constant_is_nonpositive():
    assert lipschitz_audit(lambda X: np.full(len(X), 0.5), 3, ([0], [1]), 500, 0) <= 0


def test_audit_of_identity_at_its_constant():
    assert lipschitz_audit(lambda X: X[:, 0], 1, ([0, 0], [1, 1]), 1000, 0) <= 1e-9


def test_audit_detects_violation():
    assert lipschitz_audit(lambda X: 2 * X[:, 0], 1, ([0], [1]), 10_000, 0) > 0


def test_audit_is_deterministic_per_seed():
    g = lambda X: np.sin(5 * X[:, 0])  # noqa: E731
    assert lipschitz_audit(g, 1, ([0], [1]), 100, 7) == lipschitz_audit(g, 1, ([0], [1]), 100, 7)


def test_audit_needs_pairs():
    with pytest.raises(ValueError):
        lipschitz_audit(lambda X: X[:, 0], 1, ([0], [1]), 0, 0)
