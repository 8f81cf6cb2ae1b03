"""Synthetic data distributions over [0,1]^d x [0,1].

A distribution is a marginal over points plus a target rule for labels.
Labels are a deterministic function of the point and one uniform draw ``u``,
so a pool can pre-draw its ``u`` values and stay reproducible regardless of
which labels are fetched, or in which order.
"""

from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, model_validator

from loclearn.errors import DimensionMismatch, InvalidLabel
from loclearn.lipschitz import AnchoredLipschitzFn, ExtensionRule, make_consistent, evaluate


class _Frozen(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


# marginals -------------------------------------------------------------------


class UniformX(_Frozen):
    kind: Literal["uniform"] = "uniform"

    def sample(self, n, dims, rng):
        return rng.random((n, dims))

    def boxes(self, dims):
        return [(np.zeros(dims), np.ones(dims))], np.ones(1)


class MixtureX(_Frozen):
    """Mixture of uniform axis-aligned boxes."""

    kind: Literal["mixture"] = "mixture"
    boxes_lo: List[List[float]]
    boxes_hi: List[List[float]]
    weights: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check(self):
        lo, hi = np.asarray(self.boxes_lo), np.asarray(self.boxes_hi)
        if lo.shape != hi.shape or lo.ndim != 2 or len(lo) == 0:
            raise ValueError("boxes_lo and boxes_hi must be matching non-empty (k, d) lists")
        if np.any(lo < 0) or np.any(hi > 1) or np.any(hi < lo):
            raise ValueError("boxes must satisfy 0 <= lo <= hi <= 1")
        if self.weights is not None and (len(self.weights) != len(lo) or min(self.weights) < 0 or sum(self.weights) <= 0):
            raise ValueError("weights must be nonnegative, one per box, with positive sum")
        return self

    def _w(self):
        w = np.ones(len(self.boxes_lo)) if self.weights is None else np.asarray(self.weights, dtype=float)
        return w / w.sum()

    def sample(self, n, dims, rng):
        lo, hi = np.asarray(self.boxes_lo), np.asarray(self.boxes_hi)
        if lo.shape[1] != dims:
            raise DimensionMismatch("mixture boxes do not match dims")
        comp = rng.choice(len(lo), size=n, p=self._w())
        return lo[comp] + (hi[comp] - lo[comp]) * rng.random((n, dims))

    def boxes(self, dims):
        return list(zip(np.asarray(self.boxes_lo), np.asarray(self.boxes_hi))), self._w()


class PointSetX(_Frozen):
    """Uniform (or weighted) draw from a finite point set.

    When ``labels`` is given, a drawn point carries its listed label instead
    of the target's.
    """

    kind: Literal["pointset"] = "pointset"
    points: List[List[float]]
    labels: Optional[List[float]] = None
    weights: Optional[List[float]] = None

    @model_validator(mode="after")
    def _check(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise ValueError("points must be a non-empty (n, d) list")
        if np.any(pts < 0) or np.any(pts > 1):
            raise ValueError("points must lie in [0, 1]^d")
        if self.labels is not None and len(self.labels) != len(pts):
            raise ValueError("one label per point is required")
        if self.labels is not None and any(not 0 <= y <= 1 for y in self.labels):
            raise ValueError("labels must lie in [0, 1]")
        return self

    def sample(self, n, dims, rng):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape[1] != dims:
            raise DimensionMismatch("point set does not match dims")
        p = None
        if self.weights is not None:
            p = np.asarray(self.weights, dtype=float) / np.sum(self.weights)
        return pts[rng.choice(len(pts), size=n, p=p)]

    def lookup(self, X):
        table = {tuple(p): y for p, y in zip(self.points, self.labels)}
        out = np.array([table.get(tuple(x), np.nan) for x in X])
        return out


Marginal = Annotated[Union[UniformX, MixtureX, PointSetX], Field(discriminator="kind")]


# targets ---------------------------------------------------------------------


class ConstantTarget(_Frozen):
    kind: Literal["constant"] = "constant"
    c: float = Field(ge=0, le=1)

    def label(self, X, u):
        return np.full(len(X), self.c)


class LipschitzTarget(_Frozen):
    """Noiseless labels from an anchored L-Lipschitz function."""

    kind: Literal["lipschitz"] = "lipschitz"
    points: List[List[float]]
    values: List[float]
    L: float = Field(ge=0)
    rule: ExtensionRule = ExtensionRule.MIDPOINT
    _fn: Optional[AnchoredLipschitzFn] = PrivateAttr(None)

    def function(self):
        if self._fn is None:
            self._fn = AnchoredLipschitzFn(np.asarray(self.points, dtype=float), self.values, self.L, self.rule)
        return self._fn

    def label(self, X, u):
        return np.asarray(evaluate(self.function(), X), dtype=float).reshape(-1)


class ThresholdTarget(_Frozen):
    """Binary labels: 1 where ``x[dim] >= cut``."""

    kind: Literal["threshold"] = "threshold"
    dim: int = Field(0, ge=0)
    cut: float = 0.5

    def label(self, X, u):
        return (np.asarray(X)[:, self.dim] >= self.cut).astype(float)


class BernoulliNoise(_Frozen):
    """With probability ``rate`` the label is a fair coin, else ``base(x)``."""

    kind: Literal["bernoulli_noise"] = "bernoulli_noise"
    base: Annotated[Union[ConstantTarget, LipschitzTarget, ThresholdTarget], Field(discriminator="kind")]
    rate: float = Field(ge=0, le=1)

    def label(self, X, u):
        u = np.asarray(u, dtype=float)
        coin = (u < self.rate / 2).astype(float)
        return np.where(u < self.rate, coin, self.base.label(X, u))


Target = Annotated[
    Union[ConstantTarget, LipschitzTarget, ThresholdTarget, BernoulliNoise], Field(discriminator="kind")
]


class SyntheticDistribution(_Frozen):
    dims: int = Field(ge=1)
    marginal: Marginal = Field(default_factory=UniformX)
    target: Target

    def sample_x(self, n, rng):
        return self.marginal.sample(int(n), self.dims, rng)

    def label(self, X, u):
        X = np.asarray(X, dtype=float).reshape(-1, self.dims)
        y = np.asarray(self.target.label(X, u), dtype=float).reshape(-1)
        if isinstance(self.marginal, PointSetX) and self.marginal.labels is not None:
            listed = self.marginal.lookup(X)
            y = np.where(np.isnan(listed), y, listed)
        return y

    def sample(self, n, rng):
        """``n`` labelled pairs ``(X, y)``: points first, then one uniform per point."""
        X = self.sample_x(n, rng)
        u = rng.random(len(X))
        return X, self.label(X, u)

    @property
    def is_binary(self):
        t = self.target
        if isinstance(self.marginal, PointSetX) and self.marginal.labels is not None:
            if any(y not in (0.0, 1.0) for y in self.marginal.labels):
                return False
        if isinstance(t, ThresholdTarget):
            return True
        if isinstance(t, ConstantTarget):
            return t.c in (0.0, 1.0)
        if isinstance(t, BernoulliNoise):
            return t.rate == 1 or isinstance(t.base, ThresholdTarget) or (
                isinstance(t.base, ConstantTarget) and t.base.c in (0.0, 1.0)
            )
        return False


def sample_pair(dist, rng):
    """One labelled draw ``(x, y)``."""
    X, y = dist.sample(1, rng)
    return X[0], float(y[0])


def random_lipschitz_target(L, dims, n_anchors, rng):
    """A random L-Lipschitz target: random anchors, values pushed down to consistency."""
    pts = rng.random((n_anchors, dims))
    vals = make_consistent(pts, rng.random(n_anchors), L)
    return LipschitzTarget(points=pts.tolist(), values=vals.tolist(), L=L)


def require_binary(labels):
    labels = np.asarray(labels, dtype=float)
    if np.any((labels != 0) & (labels != 1)):
        raise InvalidLabel("Nadaraya-Watson mode requires labels in {0, 1}")
    return labels
