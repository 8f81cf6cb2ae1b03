"""Random-offset partitions of [0,1]^d into alternating long and short slabs.

Two schemes are supported:

``interp``
    Short length ``1/L``, long length ``1/(L*eps)``, first boundary
    ``k/L`` with ``k`` uniform in ``{1, ..., floor(1/eps)}``. Used by the 1D
    learner, which glues long intervals by linear interpolation.
``extension``
    Short length ``2/L``, long length ``d/(L*eps)``, offset ``k*2/L`` with
    ``k`` uniform in ``{0, ..., floor(d/(2*eps))}`` per dimension. Used by the
    d-dimensional learner, which glues long boxes through constrained
    Lipschitz extensions meeting at the middle of every short slab.

Per dimension, the slots alternate ``[0, b1]`` long, then short, long, ...
and the last slot is truncated at 1. A slot keeps its kind even when
truncated. A zero offset leaves an empty leading long slot, which is dropped.
"""

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from loclearn.errors import DegenerateScale, DimensionMismatch, InvalidEpsilon, NotLongBox, OutOfDomain
from loclearn.rng import stream

_SNAP = 1e-12
SCHEMA_VERSION = 1


class CellKind(str, Enum):
    LONG_BOX = "long"
    SHORT_BOX = "short"


@dataclass(frozen=True)
class CellId:
    index: tuple
    kind: CellKind

    def key(self):
        return ",".join(str(i) for i in self.index)


def _nice(x):
    r = round(x)
    return float(r) if abs(x - r) < 1e-9 else float(x)


def scheme_units(scheme, epsilon, dims):
    """Lengths in units of ``1/L``: ``(short, long, offset_step, k_min, k_max)``.

    Boundaries are built as ``numerator / L`` so that e.g. ``3/10`` comes out
    as the float nearest 0.3 instead of ``0.2 + 0.1``.
    """
    if scheme == "interp":
        return 1.0, _nice(1.0 / epsilon), 1.0, 1, int(math.floor(1.0 / epsilon + 1e-9))
    if scheme == "extension":
        return 2.0, _nice(dims / epsilon), 2.0, 0, int(math.floor(dims / (2.0 * epsilon) + 1e-9))
    raise ValueError(f"unknown partition scheme {scheme!r}")


def scheme_lengths(scheme, L, epsilon, dims):
    """``(short_len, long_len, offset_unit, k_min, k_max)`` for a scheme."""
    short, long, step, k_min, k_max = scheme_units(scheme, epsilon, dims)
    return short / L, long / L, step / L, k_min, k_max


def _slots(k, units, L):
    """Boundaries, long-flags and short-slot midpoints for one dimension."""
    short, long, step = units
    start = k * step
    edges = [0.0]
    is_long = []
    mids = []
    if start > 0:
        edges.append(min(start / L, 1.0))
        is_long.append(True)
        mids.append(np.nan)
    j = 0
    while edges[-1] < 1.0:
        base = start + j * (short + long)
        for flag, end in ((False, base + short), (True, base + short + long)):
            if edges[-1] >= 1.0:
                break
            e = end / L
            edges.append(1.0 if e >= 1 - _SNAP else e)
            is_long.append(flag)
            mids.append(np.nan if flag else (base + short / 2) / L)
        j += 1
    return np.array(edges), np.array(is_long, dtype=bool), np.array(mids)


@dataclass(frozen=True, eq=False)
class Partition:
    dims: int
    lipschitz_constant: float
    epsilon: float
    scheme: str
    offset_index: tuple
    offsets: tuple
    boundaries: tuple
    is_long: tuple
    midpoints: tuple = None

    def __eq__(self, other):
        return isinstance(other, Partition) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.dims, self.lipschitz_constant, self.epsilon, self.scheme, self.offset_index))

    @property
    def short_len(self):
        return scheme_lengths(self.scheme, self.lipschitz_constant, self.epsilon, self.dims)[0]

    @property
    def long_len(self):
        return scheme_lengths(self.scheme, self.lipschitz_constant, self.epsilon, self.dims)[1]

    def n_intervals(self, dim):
        return len(self.is_long[dim])

    def interval(self, dim, i):
        b = self.boundaries[dim]
        return float(b[i]), float(b[i + 1])

    def to_dict(self):
        return {
            "schema": SCHEMA_VERSION,
            "dims": self.dims,
            "L": self.lipschitz_constant,
            "epsilon": self.epsilon,
            "scheme": self.scheme,
            "offset_index": list(self.offset_index),
            "offsets": list(self.offsets),
            "boundaries": [b.tolist() for b in self.boundaries],
            "parity": [["long" if f else "short" for f in flags] for flags in self.is_long],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc):
        p = from_offsets(doc["L"], doc["epsilon"], doc["dims"], doc["offset_index"], doc.get("scheme"))
        stored = [np.asarray(b, dtype=float) for b in doc.get("boundaries", p.boundaries)]
        if len(stored) != p.dims or any(
            len(a) != len(b) or not np.allclose(a, b, rtol=0, atol=1e-12) for a, b in zip(stored, p.boundaries)
        ):
            raise ValueError("stored boundaries do not match the offsets they claim to come from")
        return p

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _check_scale(L, epsilon, dims):
    if not (0 < epsilon <= 1):
        raise InvalidEpsilon(f"epsilon must lie in (0, 1], got {epsilon}")
    if dims < 1:
        raise ValueError("dims must be >= 1")
    if not (L > 0 and math.isfinite(L)):
        raise DegenerateScale("L must be a positive finite number")


def from_offsets(L, epsilon, dims, offset_index, scheme=None):
    """Deterministic partition for explicit per-dimension offset indices."""
    L, epsilon, dims = float(L), float(epsilon), int(dims)
    _check_scale(L, epsilon, dims)
    scheme = scheme or ("interp" if dims == 1 else "extension")
    short, long, unit, k_min, k_max = scheme_lengths(scheme, L, epsilon, dims)
    # every admissible offset must leave room for a full short + long pair
    if k_max < k_min or k_max * unit + short + long > 1 + _SNAP:
        raise DegenerateScale(
            f"L={L}, epsilon={epsilon}, d={dims}: largest offset {k_max * unit:.4g} plus a short "
            f"and a long slot ({short:.4g} + {long:.4g}) does not fit in [0, 1]"
        )
    offset_index = tuple(int(k) for k in np.broadcast_to(np.asarray(offset_index), (dims,)))
    if any(k < k_min or k > k_max for k in offset_index):
        raise ValueError(f"offset indices must lie in [{k_min}, {k_max}]")
    offsets = tuple(k * unit for k in offset_index)
    units = scheme_units(scheme, epsilon, dims)[:3]
    slots = [_slots(k, units, L) for k in offset_index]
    for arrays in slots:
        for a in arrays:
            a.setflags(write=False)
    return Partition(
        dims=dims,
        lipschitz_constant=L,
        epsilon=epsilon,
        scheme=scheme,
        offset_index=offset_index,
        offsets=offsets,
        boundaries=tuple(e for e, _, _ in slots),
        is_long=tuple(f for _, f, _ in slots),
        midpoints=tuple(m for _, _, m in slots),
    )


def preprocess(L, epsilon, dims, rng_seed=None, scheme=None):
    """Draw a partition with uniformly random offsets.

    ``rng_seed`` is an int (the ``partition`` stream of that seed is used) or a
    ``numpy.random.Generator``.
    """
    _check_scale(float(L), float(epsilon), int(dims))
    scheme = scheme or ("interp" if int(dims) == 1 else "extension")
    *_, k_min, k_max = scheme_lengths(scheme, float(L), float(epsilon), int(dims))
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else stream(rng_seed or 0, "partition")
    ks = rng.integers(k_min, max(k_min, k_max) + 1, size=int(dims))
    return from_offsets(L, epsilon, dims, ks, scheme)


def _as_batch(p, x):
    X = np.asarray(x, dtype=float)
    if X.ndim == 0:
        X = X.reshape(1, 1)
    elif X.ndim == 1:
        X = X.reshape(-1, 1) if p.dims == 1 and X.shape[0] != 1 else X.reshape(1, -1)
    if X.shape[1] != p.dims:
        raise DimensionMismatch(f"expected {p.dims}-dimensional points, got {X.shape[1]}")
    if np.any(~np.isfinite(X)) or np.any(X < 0) or np.any(X > 1):
        raise OutOfDomain("query points must lie in [0, 1]^d")
    return X


def locate_many(p, X):
    """Interval indices ``(m, d)`` and a long-box mask ``(m,)``.

    Points on a boundary belong to the interval on their right, except 1,
    which belongs to the last interval.
    """
    X = _as_batch(p, X)
    idx = np.empty(X.shape, dtype=np.int64)
    long_mask = np.ones(len(X), dtype=bool)
    for j in range(p.dims):
        k = np.searchsorted(p.boundaries[j], X[:, j], side="right") - 1
        idx[:, j] = np.clip(k, 0, p.n_intervals(j) - 1)
        long_mask &= p.is_long[j][idx[:, j]]
    return idx, long_mask


def locate(p, x):
    idx, long_mask = locate_many(p, np.asarray(x, dtype=float).reshape(1, -1))
    return CellId(tuple(int(i) for i in idx[0]), CellKind.LONG_BOX if long_mask[0] else CellKind.SHORT_BOX)


def _require_long(p, cell):
    if cell.kind is not CellKind.LONG_BOX or not all(p.is_long[j][i] for j, i in enumerate(cell.index)):
        raise NotLongBox(f"cell {cell.index} is not a long box")


def cell_box(p, cell):
    lo = np.array([p.boundaries[j][i] for j, i in enumerate(cell.index)])
    hi = np.array([p.boundaries[j][i + 1] for j, i in enumerate(cell.index)])
    return lo, hi


def extension_box(p, cell):
    """The long box inflated by ``1/L`` per side, clamped to the unit cube."""
    _require_long(p, cell)
    lo, hi = cell_box(p, cell)
    r = 1.0 / p.lipschitz_constant
    return np.maximum(0.0, lo - r), np.minimum(hi + r, 1.0)


def constraint_planes(p, cell):
    """Per-dimension coordinates of the value-1 hyperplanes around a long box.

    The planes sit at the slot midpoints of the neighbouring short intervals.
    A neighbour that does not exist, or whose midpoint falls outside the
    domain, yields ``inf``.
    """
    _require_long(p, cell)
    left = np.full(p.dims, np.inf)
    right = np.full(p.dims, np.inf)
    for j, i in enumerate(cell.index):
        mids = p.midpoints[j]
        if i - 1 >= 0 and mids[i - 1] >= 0:
            left[j] = mids[i - 1]
        if i + 1 < len(mids) and mids[i + 1] <= 1 + _SNAP:
            right[j] = min(mids[i + 1], 1.0)
    return left, right


def constraint_distance(p, cell, x):
    """Sup-norm distance from ``x`` to the value-1 constraint set of ``cell``.

    Returns a float for a single point and an array for a batch. ``inf``
    when the cell has no neighbouring short interval at all.
    """
    left, right = constraint_planes(p, cell)
    X = np.asarray(x, dtype=float)
    single = X.ndim <= 1 and not (p.dims == 1 and X.ndim == 1 and X.shape[0] != 1)
    X = X.reshape(-1, p.dims)
    with np.errstate(invalid="ignore"):
        dl = np.where(np.isfinite(left), np.abs(X - left), np.inf)
        dr = np.where(np.isfinite(right), np.abs(X - right), np.inf)
    out = np.minimum(dl, dr).min(axis=1)
    return float(out[0]) if single else out


def owner_index(p, X):
    """Index of the long box whose extension region serves each point.

    Returns ``(idx, ok)``. ``ok`` is False for points that lie on a value-1
    hyperplane or in an edge short slab with no long neighbour on their side;
    those points are answered with 1.
    """
    X = _as_batch(p, X)
    idx, _ = locate_many(p, X)
    ok = np.ones(len(X), dtype=bool)
    for j in range(p.dims):
        i = idx[:, j]
        flags = p.is_long[j]
        short = ~flags[i]
        mid = p.midpoints[j][i]
        x = X[:, j]
        go_left = short & (x < mid)
        go_right = short & (x > mid)
        on_plane = short & (x == mid)
        has_left = i - 1 >= 0
        has_right = i + 1 < len(flags)
        ok &= ~on_plane
        ok &= ~(go_left & ~has_left)
        ok &= ~(go_right & ~has_right)
        idx[:, j] = np.where(go_left, i - 1, np.where(go_right, i + 1, i))
    return idx, ok


def short_mass(p, sampler, n, rng_seed=None):
    """Monte-Carlo probability of landing in a short cell.

    ``sampler`` is either an object with ``sample_x(n, rng)`` or a callable
    ``(n, rng) -> (n, d) array``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else stream(rng_seed or 0, "eval")
    draw = getattr(sampler, "sample_x", sampler)
    _, long_mask = locate_many(p, np.asarray(draw(n, rng), dtype=float))
    return float(1.0 - long_mask.mean())


def _long_overlap(p, dim, lo, hi):
    edges = p.boundaries[dim]
    a = np.clip(edges[:-1], lo, hi)
    b = np.clip(edges[1:], lo, hi)
    return float(((b - a) * p.is_long[dim]).sum())


def exact_short_mass(p, boxes, weights=None):
    """Short-cell mass of a mixture of uniform boxes, computed in closed form.

    ``boxes`` is a list of ``(lo, hi)`` pairs. Each coordinate of a uniform box
    is independent, so the long mass of one box is a product over dimensions.
    """
    weights = np.full(len(boxes), 1.0 / len(boxes)) if weights is None else np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    long_mass = 0.0
    for w, (lo, hi) in zip(weights, boxes):
        lo = np.broadcast_to(np.asarray(lo, dtype=float), (p.dims,))
        hi = np.broadcast_to(np.asarray(hi, dtype=float), (p.dims,))
        frac = 1.0
        for j in range(p.dims):
            width = hi[j] - lo[j]
            frac *= _long_overlap(p, j, lo[j], hi[j]) / width if width > 0 else float(
                p.is_long[j][np.clip(np.searchsorted(p.boundaries[j], lo[j], side="right") - 1, 0, p.n_intervals(j) - 1)]
            )
        long_mass += w * frac
    return float(1.0 - long_mass)
