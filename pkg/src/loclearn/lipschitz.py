"""Bounded L-Lipschitz functions under the sup-norm.

Functions are represented by anchor points with values in [0, 1]. Values away
from the anchors come from the McShane upper/lower extensions, or from their
average. The L1 empirical risk minimiser is solved as a linear program.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from loclearn.errors import DimensionMismatch, EmptyInput, InconsistentConstraints, OutOfDomain
from loclearn.rng import as_generator

LIPSCHITZ_TOL = 1e-9

# rows x anchors x dims elements per distance block
_CHUNK_ELEMENTS = 2_000_000


class ExtensionRule(str, Enum):
    UPPER_MCSHANE = "upper"
    LOWER_MCSHANE = "lower"
    MIDPOINT = "midpoint"


def _as_points(x, dims=None):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if dims == 1 else arr.reshape(1, -1)
    if dims is not None and arr.shape[1] != dims:
        raise DimensionMismatch(f"expected points of dimension {dims}, got {arr.shape[1]}")
    return arr


def max_pair_violation(points, values, L):
    """Largest ``|v_i - v_j| - L * ||x_i - x_j||_inf`` over all anchor pairs.

    Pairs at sup-distance >= 1/L cannot violate anything when values lie in
    [0, 1], so only closer pairs are inspected (adjacent pairs in 1D).
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n < 2:
        return -np.inf
    if L == 0:
        return float(values.max() - values.min())
    if points.shape[1] == 1:
        order = np.argsort(points[:, 0], kind="stable")
        xs, vs = points[order, 0], values[order]
        return float(np.max(np.abs(np.diff(vs)) - L * np.diff(xs)))
    pairs = cKDTree(points).query_pairs(1.0 / L, p=np.inf, output_type="ndarray")
    if len(pairs) == 0:
        return -np.inf
    dist = np.abs(points[pairs[:, 0]] - points[pairs[:, 1]]).max(axis=1)
    return float(np.max(np.abs(values[pairs[:, 0]] - values[pairs[:, 1]]) - L * dist))


@dataclass(frozen=True)
class AnchoredLipschitzFn:
    """An L-Lipschitz function ``[0,1]^d -> [0,1]`` pinned at anchor points.

    Immutable once built; evaluation is thread-safe.
    """

    points: np.ndarray
    values: np.ndarray
    lipschitz_constant: float
    rule: ExtensionRule = ExtensionRule.MIDPOINT
    _sorted: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        points = np.array(self.points, dtype=float)
        values = np.array(self.values, dtype=float).reshape(-1)
        if points.ndim == 1:
            points = points.reshape(len(values), -1) if len(values) else points.reshape(0, 1)
        if points.ndim != 2 or len(points) != len(values):
            raise DimensionMismatch("points must be (n, d) with one value per point")
        L = float(self.lipschitz_constant)
        if not np.isfinite(L) or L < 0:
            raise ValueError("lipschitz_constant must be a finite nonnegative number")
        if np.any(values < 0) or np.any(values > 1) or not np.all(np.isfinite(values)):
            raise InconsistentConstraints("anchor values must lie in [0, 1]")
        if len(values) > 1:
            worst = max_pair_violation(points, values, L)
            if worst > LIPSCHITZ_TOL:
                raise InconsistentConstraints(
                    f"anchors are not {L}-Lipschitz (worst pair violation {worst:.3g})"
                )
        points.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "lipschitz_constant", L)
        object.__setattr__(self, "rule", ExtensionRule(self.rule))
        if points.shape[1] == 1 and len(values):
            order = np.argsort(points[:, 0], kind="stable")
            object.__setattr__(self, "_sorted", (points[order, 0], values[order]))
        else:
            object.__setattr__(self, "_sorted", ())

    @property
    def dims(self):
        return self.points.shape[1]

    def __len__(self):
        return len(self.values)

    def with_rule(self, rule):
        return AnchoredLipschitzFn(self.points, self.values, self.lipschitz_constant, rule)

    def envelopes(self, X):
        """Unclamped McShane envelopes at rows of ``X``.

        Returns ``(upper, lower, hit, hit_value)`` where ``hit`` marks rows that
        coincide with an anchor and ``hit_value`` is that anchor's value.
        """
        X = _as_points(X, self.dims)
        m = len(X)
        L = self.lipschitz_constant
        hit = np.zeros(m, dtype=bool)
        hit_value = np.zeros(m)
        if len(self) == 0:
            return np.full(m, np.inf), np.full(m, -np.inf), hit, hit_value
        if self.dims == 1:
            return self._envelopes_1d(X[:, 0])
        upper = np.empty(m)
        lower = np.empty(m)
        P, v = self.points, self.values
        step = max(1, _CHUNK_ELEMENTS // (len(P) * self.dims))
        for s in range(0, m, step):
            D = np.abs(X[s:s + step, None, :] - P[None, :, :]).max(axis=2)
            upper[s:s + step] = (v + L * D).min(axis=1)
            lower[s:s + step] = (v - L * D).max(axis=1)
            zero = D == 0
            any_zero = zero.any(axis=1)
            hit[s:s + step] = any_zero
            hit_value[s:s + step] = np.where(any_zero, v[np.argmax(zero, axis=1)], 0.0)
        return upper, lower, hit, hit_value

    def _envelopes_1d(self, x):
        # For L-consistent anchors on a line only the two bracketing anchors matter.
        xs, vs = self._sorted
        L = self.lipschitz_constant
        k = np.searchsorted(xs, x, side="right")
        left = k - 1
        has_left = left >= 0
        has_right = k < len(xs)
        li = np.where(has_left, left, 0)
        ri = np.where(has_right, k, 0)
        dl = x - xs[li]
        dr = xs[ri] - x
        up_l = np.where(has_left, vs[li] + L * dl, np.inf)
        up_r = np.where(has_right, vs[ri] + L * dr, np.inf)
        lo_l = np.where(has_left, vs[li] - L * dl, -np.inf)
        lo_r = np.where(has_right, vs[ri] - L * dr, -np.inf)
        # duplicates share a value, so the last one in sorted order is as good as the first
        hit = has_left & (dl == 0)
        return np.minimum(up_l, up_r), np.maximum(lo_l, lo_r), hit, np.where(hit, vs[li], 0.0)

    def __call__(self, x):
        return evaluate(self, x)


def _combine(rule, upper, lower):
    up = np.clip(upper, 0.0, 1.0)
    lo = np.clip(lower, 0.0, 1.0)
    if rule is ExtensionRule.UPPER_MCSHANE:
        return up
    if rule is ExtensionRule.LOWER_MCSHANE:
        return lo
    return (up + lo) / 2.0


def evaluate(f, x):
    """Evaluate ``f`` at one point (returns float) or at rows of an array."""
    X = np.asarray(x, dtype=float)
    single = X.ndim == 0 or (X.ndim == 1 and (f.dims > 1 or X.shape[0] == 1))
    upper, lower, hit, hit_value = f.envelopes(X)
    out = np.where(hit, hit_value, _combine(f.rule, upper, lower))
    return float(out[0]) if single else out


@dataclass(frozen=True)
class ErmProblem:
    points: np.ndarray
    labels: np.ndarray
    lipschitz_constant: float
    domain_box: tuple = None

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=float).reshape(-1)
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        if len(points) != len(labels):
            raise DimensionMismatch("one label per sample point is required")
        if self.lipschitz_constant < 0:
            raise ValueError("lipschitz_constant must be nonnegative")
        if np.any(labels < 0) or np.any(labels > 1):
            raise ValueError("labels must lie in [0, 1]")
        d = points.shape[1]
        box = self.domain_box
        if box is None:
            box = (np.zeros(d), np.ones(d))
        lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (d,)) for b in box)
        if len(points) and (np.any(points < lo - 1e-12) or np.any(points > hi + 1e-12)):
            raise OutOfDomain("sample points must lie inside the domain box")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "lipschitz_constant", float(self.lipschitz_constant))
        object.__setattr__(self, "domain_box", (lo, hi))

    def objective(self, values):
        return float(np.abs(self.labels - np.asarray(values, dtype=float)).sum())


def _constraint_pairs(points, L):
    """Pairs that need an explicit Lipschitz row in the LP."""
    if points.shape[1] == 1:
        order = np.argsort(points[:, 0], kind="stable")
        pairs = np.column_stack([order[:-1], order[1:]])
    else:
        pairs = cKDTree(points).query_pairs(1.0 / L, p=np.inf, output_type="ndarray")
        pairs = pairs.reshape(-1, 2)
    dist = np.abs(points[pairs[:, 0]] - points[pairs[:, 1]]).max(axis=1)
    return pairs, dist


def _solve_lp(points, labels, L):
    # variables: v (n) then slacks t (n); minimise sum t with t >= |y - v|
    n = len(labels)
    pairs, dist = _constraint_pairs(points, L)
    m = len(pairs)
    eye = sparse.identity(n, format="csr")
    rows = np.repeat(np.arange(m), 2)
    cols = pairs.reshape(-1)
    signs = np.tile([1.0, -1.0], m)
    diff = sparse.csr_matrix((signs, (rows, cols)), shape=(m, n))
    zeros = sparse.csr_matrix((m, n))
    A = sparse.vstack(
        [
            sparse.hstack([-eye, -eye]),
            sparse.hstack([eye, -eye]),
            sparse.hstack([diff, zeros]),
            sparse.hstack([-diff, zeros]),
        ],
        format="csr",
    )
    b = np.concatenate([-labels, labels, L * dist, L * dist])
    c = np.concatenate([np.zeros(n), np.ones(n)])
    bounds = [(0.0, 1.0)] * n + [(0.0, None)] * n
    res = linprog(c, A_ub=A, b_ub=b, bounds=bounds, method="highs")
    if res.status != 0:
        raise RuntimeError(f"ERM linear program failed: {res.message}")
    return np.clip(res.x[:n], 0.0, 1.0)


def make_consistent(points, values, L):
    """Lower McShane envelope of the solver output at its own anchors.

    Removes the solver's feasibility noise: the result is L-Lipschitz up to
    rounding, never above the input, and equal to it when the input is feasible.
    """
    if points.shape[1] == 1:
        order = np.argsort(points[:, 0], kind="stable")
        x, v = points[order, 0], values[order]
        fwd = L * x + np.minimum.accumulate(v - L * x)
        bwd = -L * x + np.minimum.accumulate((v + L * x)[::-1])[::-1]
        out = np.empty_like(values)
        out[order] = np.minimum(v, np.minimum(fwd, bwd))
        return np.clip(out, 0.0, 1.0)
    out = np.empty_like(values)
    step = max(1, _CHUNK_ELEMENTS // (len(points) * points.shape[1]))
    for s in range(0, len(points), step):
        D = np.abs(points[s:s + step, None, :] - points[None, :, :]).max(axis=2)
        out[s:s + step] = (values + L * D).min(axis=1)
    return np.clip(out, 0.0, 1.0)


def erm_fit(problem, rule=ExtensionRule.MIDPOINT):
    """L1 empirical risk minimiser over bounded L-Lipschitz functions.

    The anchors of the result are exactly the sample points. In 1D only
    sorted-adjacent Lipschitz constraints are written (they imply the rest);
    in higher dimensions pairs at sup-distance >= 1/L are dropped because the
    [0, 1] bounds already imply them.
    """
    points, labels, L = problem.points, problem.labels, problem.lipschitz_constant
    n = len(labels)
    if n == 0:
        raise EmptyInput("erm_fit needs at least one sample")
    if n == 1:
        values = labels.copy()
    elif L == 0:
        # any median minimises the L1 loss of a constant; take the lower one
        values = np.full(n, np.sort(labels)[(n - 1) // 2])
    else:
        values = make_consistent(points, _solve_lp(points, labels, L), L)
    return AnchoredLipschitzFn(points, values, L, rule)


def l1_objective(f, points, labels):
    return float(np.abs(np.asarray(labels, dtype=float) - evaluate(f, _as_points(points, f.dims))).sum())


@dataclass(frozen=True)
class ConstrainedExtension:
    """Extension of anchored values that is pinned to ``constraint_value``
    on a set given by its exact sup-norm distance function."""

    anchors: AnchoredLipschitzFn
    constraint_distance: object
    constraint_value: float
    rule: ExtensionRule = ExtensionRule.UPPER_MCSHANE

    def __call__(self, x):
        X = np.asarray(x, dtype=float)
        single = X.ndim == 0 or (X.ndim == 1 and (self.anchors.dims > 1 or X.shape[0] == 1))
        X = _as_points(X, self.anchors.dims)
        c = self.constraint_value
        cd = np.asarray(self.constraint_distance(X), dtype=float)
        if len(self.anchors) == 0:
            out = np.full(len(X), c)
        else:
            L = self.anchors.lipschitz_constant
            upper, lower, hit, hit_value = self.anchors.envelopes(X)
            out = _combine(self.rule, np.minimum(upper, c + L * cd), np.maximum(lower, c - L * cd))
            out = np.where(hit, hit_value, out)
        out = np.where(cd == 0, c, out)
        return float(out[0]) if single else out


def mcshane_extend_constrained(anchors, L, constraint_distance, constraint_value, rule=ExtensionRule.UPPER_MCSHANE):
    """L-Lipschitz extension of ``anchors`` that equals ``constraint_value``
    wherever ``constraint_distance`` is zero.

    ``anchors`` is an :class:`AnchoredLipschitzFn` or a ``(points, values)``
    pair. With no anchors the extension is the constant ``constraint_value``.

    Raises
    ------
    InconsistentConstraints
        If some anchor value differs from ``constraint_value`` by more than
        ``L`` times its distance to the constraint set.
    """
    if not isinstance(anchors, AnchoredLipschitzFn):
        points, values = anchors
        values = np.asarray(values, dtype=float).reshape(-1)
        points = np.asarray(points, dtype=float)
        points = points.reshape(len(values), -1) if points.ndim < 2 else points
        anchors = AnchoredLipschitzFn(points, values, L, rule)
    elif anchors.lipschitz_constant != L:
        anchors = AnchoredLipschitzFn(anchors.points, anchors.values, L, anchors.rule)
    if len(anchors):
        cd = np.asarray(constraint_distance(anchors.points), dtype=float)
        gap = np.abs(anchors.values - constraint_value) - L * cd
        if np.max(gap) > LIPSCHITZ_TOL:
            raise InconsistentConstraints(
                f"anchor value too far from the constraint value (excess {np.max(gap):.3g})"
            )
    return ConstrainedExtension(anchors, constraint_distance, float(constraint_value), ExtensionRule(rule))


def lipschitz_audit(g, L, domain_box, n_pairs, rng_seed=None, radius=None):
    """Largest observed ``|g(x) - g(y)| - L * ||x - y||_inf`` over random pairs.

    ``g`` is called once on an ``(2 * n_pairs, d)`` array. Pairs are uniform in
    ``domain_box``; with ``radius`` the partner of each point is a uniform
    perturbation of at most ``radius`` per coordinate (clipped to the box),
    which probes local behaviour much harder than independent pairs.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    lo, hi = (np.asarray(b, dtype=float).reshape(-1) for b in domain_box)
    rng = as_generator(rng_seed)
    d = len(lo)
    X = lo + (hi - lo) * rng.random((n_pairs, d))
    if radius is None:
        Y = lo + (hi - lo) * rng.random((n_pairs, d))
    else:
        Y = np.clip(X + rng.uniform(-radius, radius, size=(n_pairs, d)), lo, hi)
    vals = np.asarray(g(np.vstack([X, Y])), dtype=float).reshape(-1)
    gx, gy = vals[:n_pairs], vals[n_pairs:]
    return float(np.max(np.abs(gx - gy) - L * np.abs(X - Y).max(axis=1)))
