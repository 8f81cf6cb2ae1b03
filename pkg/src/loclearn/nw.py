"""Error estimation for Nadaraya-Watson prediction with diagonal transforms.

Kernel ``K_A(x, y) = 1 / (1 + ||A (x - y)||_2^2)`` with ``A`` diagonal and
entries in ``[1, 2]``. The prediction at ``x`` puts weight
``p_A(x_i, x) = K_A(x_i, x) / sum_j K_A(x_j, x)`` on each dataset label.

``nw_error`` estimates ``min_A E|f(x) - sum_i p_A(x_i, x) f(x_i)|``-style losses
over a geometric grid of transforms from only ``2M`` labels: one sample
``z~`` drawn from ``p_I(., z)`` per fresh point ``z`` is reused for every
transform through the importance weight ``p_A / p_I``.
"""

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from loclearn.constants import load_constants
from loclearn.distributions import require_binary
from loclearn.errors import DimensionMismatch, EmptyDataset, InvalidEpsilon, PreconditionViolated
from loclearn.learner import LabelOracle, TableLabels, UnlabeledPool, SyntheticLabels
from loclearn.rng import stream

_ROWS = 1_000_000


@dataclass(frozen=True)
class DiagonalTransform:
    eigenvalues: np.ndarray
    lo: float = 1.0
    hi: float = 2.0

    def __post_init__(self):
        ev = np.array(self.eigenvalues, dtype=float).reshape(-1)
        if len(ev) == 0:
            raise DimensionMismatch("a transform needs at least one eigenvalue")
        if np.any(ev < self.lo) or np.any(ev > self.hi):
            raise ValueError(f"eigenvalues must lie in [{self.lo}, {self.hi}]")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def dims(self):
        return len(self.eigenvalues)

    @classmethod
    def identity(cls, dims, lo=1.0, hi=2.0):
        return cls(np.full(dims, lo), lo, hi)


def _diag(A):
    return A.eigenvalues if isinstance(A, DiagonalTransform) else np.asarray(A, dtype=float).reshape(-1)


def kernel(A, x, y):
    a = _diag(A)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != len(a) or y.shape[-1] != len(a):
        raise DimensionMismatch("kernel arguments must match the transform dimension")
    return 1.0 / (1.0 + np.sum((a * (x - y)) ** 2, axis=-1))


def _kernel_rows(A, S, Q):
    # exact differences (no expansion) for the estimator's importance weights
    a = _diag(A)
    return 1.0 / (1.0 + (((Q[:, None, :] - S[None, :, :]) * a) ** 2).sum(axis=2))


def prediction_probs(A, S, q):
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or len(S) == 0:
        raise EmptyDataset("prediction_probs needs at least one dataset point")
    k = kernel(A, S, np.asarray(q, dtype=float)[None, :])
    return k / k.sum()


def epsilon_net(dims, epsilon, lo=1.0, hi=2.0):
    """Product grid of ``lo * (1+eps)^k`` below ``hi``, with ``hi`` appended."""
    if not (0 < epsilon <= 1):
        raise InvalidEpsilon(f"epsilon must lie in (0, 1], got {epsilon}")
    grid = [float(lo)]
    while grid[-1] * (1 + epsilon) < hi - 1e-12:
        grid.append(grid[-1] * (1 + epsilon))
    grid.append(float(hi))
    return [DiagonalTransform(np.array(c), lo, hi) for c in itertools.product(grid, repeat=int(dims))]


@dataclass(frozen=True)
class KdeMode:
    """``exact`` sums every kernel term; ``subsample:<m>`` rescales a uniform m-subset."""

    kind: str = "exact"
    m: int = None

    def __post_init__(self):
        if self.kind not in ("exact", "subsample"):
            raise ValueError(f"unknown kde mode {self.kind!r}")
        if self.kind == "subsample" and (self.m is None or int(self.m) < 1):
            raise ValueError("subsample mode needs m >= 1")

    @classmethod
    def parse(cls, text):
        if isinstance(text, KdeMode):
            return text
        text = (text or "exact").strip().lower()
        if text == "exact":
            return cls()
        kind, _, m = text.partition(":")
        if kind != "subsample" or not m.isdigit():
            raise ValueError(f"kde mode must be 'exact' or 'subsample:<m>', got {text!r}")
        return cls("subsample", int(m))

    def __str__(self):
        return self.kind if self.kind == "exact" else f"subsample:{self.m}"


class NwDataset:
    """Dataset points with lazily fetched binary labels."""

    def __init__(self, points, source, noise=None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if len(pts) == 0:
            raise EmptyDataset("NW dataset is empty")
        self.pool = UnlabeledPool(pts, np.zeros(len(pts)) if noise is None else noise)
        self.oracle = LabelOracle(self.pool, source)

    @property
    def points(self):
        return self.pool.points

    @property
    def dims(self):
        return self.pool.dims

    def __len__(self):
        return len(self.pool)

    @classmethod
    def from_labels(cls, points, labels):
        return cls(points, TableLabels(require_binary(labels)))

    @classmethod
    def draw(cls, distribution, n, seed):
        rng = stream(seed, "dataset")
        X = distribution.sample_x(n, rng)
        return cls(X, SyntheticLabels(distribution), rng.random(len(X)))

    def fetch(self, indices):
        return require_binary(self.oracle.fetch(indices, tag="dataset"))

    def all_labels(self):
        """Every label, read straight from the source (no accounting)."""
        idx = np.arange(len(self))
        return require_binary(self.oracle.source(idx, self.pool.points, self.pool.noise))


def _as_labeled(dataset):
    if isinstance(dataset, NwDataset):
        return dataset.points, dataset.all_labels()
    pts, labels = dataset
    pts = np.asarray(pts, dtype=float)
    if len(pts) == 0:
        raise EmptyDataset("dataset is empty")
    return pts.reshape(len(pts), -1), np.asarray(labels, dtype=float).reshape(-1)


def exact_nw_loss(A, dataset, eval_set):
    """Mean over ``eval_set`` of ``sum_i p_A(x_i, x) |f(x_i) - y|``."""
    return exact_nw_losses([A], dataset, eval_set)[0]


def exact_nw_losses(transforms, dataset, eval_set):
    """:func:`exact_nw_loss` for several transforms, sharing the squared differences."""
    S, f = _as_labeled(dataset)
    X, y = eval_set
    X = np.asarray(X, dtype=float).reshape(-1, S.shape[1])
    y = np.asarray(y, dtype=float).reshape(-1)
    if len(X) == 0:
        raise EmptyDataset("evaluation set is empty")
    sq_eigs = np.array([_diag(A) ** 2 for A in transforms])
    totals = np.zeros(len(transforms))
    step = max(1, _ROWS // (len(S) * S.shape[1]))
    for s in range(0, len(X), step):
        D2 = (X[s:s + step, None, :] - S[None, :, :]) ** 2
        miss = np.abs(f[None, :] - y[s:s + step, None])
        for t, a2 in enumerate(sq_eigs):
            K = 1.0 / (1.0 + D2 @ a2)
            totals[t] += float(((K * miss).sum(1) / K.sum(1)).sum())
    return (totals / len(X)).tolist()


def check_kernel_stability(A1, A2, S, q, i=0, epsilon=None):
    """Realised ``p_A1(x_i, q) / p_A2(x_i, q)`` and the bound ``(1+eps)^4``.

    ``epsilon`` defaults to the smallest value for which the entrywise
    sandwich ``A2/(1+eps) <= A1 <= (1+eps) A2`` holds.
    """
    a1, a2 = _diag(A1), _diag(A2)
    if len(a1) != len(a2):
        raise DimensionMismatch("transforms differ in dimension")
    tight = float(np.max(np.maximum(a1 / a2, a2 / a1))) - 1.0
    if epsilon is None:
        epsilon = tight
    elif np.any(a1 > (1 + epsilon) * a2) or np.any(a1 < a2 / (1 + epsilon)):
        raise PreconditionViolated(f"transforms are not within a factor 1+{epsilon} of each other")
    ratio = prediction_probs(A1, S, q)[i] / prediction_probs(A2, S, q)[i]
    return float(ratio), float((1 + epsilon) ** 4)


def check_net_sufficiency(dataset, eval_set, epsilon, lo=1.0, hi=2.0):
    """``(coarse_min, fine_min, gap)`` for the ``epsilon`` net against a finer one.

    The fine grid is the union of the ``epsilon/4`` and ``epsilon`` nets, so it
    contains the coarse grid and the gap is never negative.
    """
    S, f = _as_labeled(dataset)
    d = S.shape[1]
    coarse_net = epsilon_net(d, epsilon, lo, hi)
    coarse_keys = {tuple(A.eigenvalues) for A in coarse_net}
    extra = [A for A in epsilon_net(d, epsilon / 4, lo, hi) if tuple(A.eigenvalues) not in coarse_keys]
    losses = exact_nw_losses(coarse_net + extra, (S, f), eval_set)
    coarse = losses[: len(coarse_net)]
    fine = losses
    coarse_min, fine_min = min(coarse), min(fine)
    return coarse_min, fine_min, coarse_min - fine_min


@dataclass(frozen=True)
class NwEstimate:
    value: float
    argmin_eigenvalues: list
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
    losses: list = field(default_factory=list)
    note: str = ""

    @property
    def argmin_transform(self):
        return DiagonalTransform(np.array(self.argmin_eigenvalues))

    def to_dict(self):
        return {
            "value": self.value,
            "argmin_eigenvalues": list(self.argmin_eigenvalues),
            "n_labels": self.n_labels,
            "net_size": self.net_size,
            "seed": self.seed,
            "kde_mode": self.kde_mode,
            "M": self.M,
            "N": self.N,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "max_summand": self.max_summand,
            "summand_bound": self.summand_bound,
            "note": self.note,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


def _sample_partners(S, Z, rng):
    """Index ``j`` per row of ``Z`` with probability ``p_I(x_j, z)``, plus ``p_I`` there."""
    ident = np.ones(S.shape[1])
    idx = np.empty(len(Z), dtype=np.int64)
    p_at = np.empty(len(Z))
    r = rng.random(len(Z))
    step = max(1, _ROWS // len(S))
    for s in range(0, len(Z), step):
        K = _kernel_rows(ident, S, Z[s:s + step])
        cdf = np.cumsum(K, axis=1)
        total = cdf[:, -1]
        j = np.array([np.searchsorted(row, t, side="right") for row, t in zip(cdf, r[s:s + step] * total)])
        j = np.minimum(j, len(S) - 1)
        idx[s:s + step] = j
        p_at[s:s + step] = K[np.arange(len(j)), j] / total
    return idx, p_at


def nw_error(dataset, distribution, epsilon, delta, rng_seed, kde_mode="exact", constants=None, lo=1.0, hi=2.0):
    """Importance-sampling estimate of the best NW loss over the transform net."""
    if not (0 < epsilon <= 1):
        raise InvalidEpsilon(f"epsilon must lie in (0, 1], got {epsilon}")
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    if len(dataset) == 0:
        raise EmptyDataset("NW dataset is empty")
    mode = KdeMode.parse(kde_mode)
    consts = load_constants(constants)
    seed = int(rng_seed)
    S = dataset.points
    N, d = S.shape
    M = consts.nw_draws(epsilon, delta, d)

    rng = stream(seed, "nw-sample")
    Z, fz = distribution.sample(M, rng)
    fz = require_binary(fz)
    partners, p_identity = _sample_partners(S, Z, rng)
    before = dataset.oracle.distinct_queries
    f_partner = dataset.fetch(partners)
    n_labels = M + dataset.oracle.distinct_queries - before
    diff = np.abs(fz - f_partner)

    subsets = None
    if mode.kind == "subsample" and mode.m < N:
        kde_rng = stream(seed, "kde")
        subsets = np.stack([kde_rng.choice(N, size=mode.m, replace=False) for _ in range(M)])

    net = epsilon_net(d, epsilon, lo, hi)
    losses = []
    max_summand = 0.0
    for A in net:
        a = A.eigenvalues
        num = 1.0 / (1.0 + (((Z - S[partners]) * a) ** 2).sum(1))
        if subsets is None:
            denom = _kernel_rows(a, S, Z).sum(1)
        else:
            denom = np.array([_kernel_rows(a, S[sub], z[None, :]).sum() for sub, z in zip(subsets, Z)]) * (N / mode.m)
        summands = diff * (num / denom) / p_identity
        losses.append(float(summands.mean()))
        max_summand = max(max_summand, float(summands.max()))
    best = int(np.argmin(losses))
    return NwEstimate(
        value=losses[best],
        argmin_eigenvalues=net[best].eigenvalues.tolist(),
        n_labels=int(n_labels),
        net_size=len(net),
        seed=seed,
        kde_mode=str(mode),
        M=int(M),
        N=int(N),
        epsilon=float(epsilon),
        delta=float(delta),
        max_summand=max_summand,
        summand_bound=float((hi / lo) ** 4),
        losses=losses,
        note="exact kernel sums; no data-structure failure term" if subsets is None else "subsampled kernel sums",
    )
