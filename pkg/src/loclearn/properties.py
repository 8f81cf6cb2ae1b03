"""A quick self-check suite over the library's invariants.

Each check returns ``(passed, detail)``. ``run_properties`` runs all of them
for one seed; the CLI exits non-zero if any fails.
"""

import itertools

import numpy as np

from loclearn.constants import Constants
from loclearn.distributions import BernoulliNoise, SyntheticDistribution, random_lipschitz_target
from loclearn.learner import UnlabeledPool, new_session, query
from loclearn.lipschitz import (
    ErmProblem,
    ExtensionRule,
    erm_fit,
    lipschitz_audit,
    max_pair_violation,
)
from loclearn.nw import DiagonalTransform, check_kernel_stability, check_net_sufficiency, epsilon_net, prediction_probs
from loclearn.partition import exact_short_mass, preprocess
from loclearn.rng import stream


def _grid_optimum(points, labels, L, step):
    # exhaustive search over a value grid; only for tiny instances
    grid = np.arange(0.0, 1.0 + step / 2, step)
    n = len(labels)
    D = np.abs(points[:, None, :] - points[None, :, :]).max(axis=2)
    best = np.inf
    for combo in itertools.product(grid, repeat=n):
        v = np.array(combo)
        if np.all(np.abs(v[:, None] - v[None, :]) <= L * D + 1e-12):
            best = min(best, float(np.abs(v - labels).sum()))
    return best


def check_erm_grid(rng):
    worst = 0.0
    for _ in range(5):
        d = int(rng.integers(1, 3))
        n = int(rng.integers(1, 4))
        pts, y, L = rng.random((n, d)), rng.random(n), float(rng.uniform(0.5, 6))
        prob = ErmProblem(pts, y, L)
        got = prob.objective(erm_fit(prob).values)
        worst = max(worst, abs(got - _grid_optimum(pts, y, L, 0.05)))
    return worst <= 0.1, f"largest gap to the value grid {worst:.3g}"


def check_envelopes(rng):
    pts, L = rng.random((20, 2)), 5.0
    f = erm_fit(ErmProblem(pts, rng.random(20), L))
    box = (np.zeros(2), np.ones(2))
    X = rng.random((2000, 2))
    ordered = bool(np.all(f.with_rule("upper")(X) >= f.with_rule("lower")(X) - 1e-12))
    worst = max(lipschitz_audit(f.with_rule(r), L, box, 2000, rng) for r in ExtensionRule)
    consistent = max_pair_violation(f.points, f.values, L) <= 1e-9
    return ordered and worst <= 1e-9 and consistent, f"max audit violation {worst:.3g}"


def check_partition_tiling(rng):
    bad = []
    for d, L, eps in ((1, 40.0, 0.25), (2, 40.0, 0.25), (3, 60.0, 0.5)):
        p = preprocess(L, eps, d, rng)
        for j in range(d):
            if abs(np.diff(p.boundaries[j]).sum() - 1) > 1e-12 or np.any(np.diff(p.boundaries[j]) <= 0):
                bad.append((d, j))
    return not bad, f"bad dimensions {bad}" if bad else "all dimensions tile [0, 1]"


def check_short_mass(rng):
    masses = [exact_short_mass(preprocess(100.0, 0.25, 1, rng), [(0.0, 1.0)]) for _ in range(50)]
    return float(np.mean(masses)) <= 0.25, f"mean short mass {np.mean(masses):.3g}"


def check_session_lipschitz(rng):
    out = []
    for d, L, eps in ((1, 30.0, 0.4), (2, 20.0, 0.5)):
        target = random_lipschitz_target(L, d, 20, rng)
        dist = SyntheticDistribution(dims=d, target=BernoulliNoise(base=target, rate=0.3))
        seed = int(rng.integers(2**31))
        pool = UnlabeledPool.draw(dist, 1500, seed)
        s = new_session(preprocess(L, eps, d, seed), pool, dist, 60)
        box = (np.zeros(d), np.ones(d))
        out.append(lipschitz_audit(lambda X: query(s, X), L, box, 2000, rng, radius=2 / L))
    return max(out) <= 1e-6, f"max audit violation {max(out):.3g}"


def check_kernel(rng):
    worst = 0.0
    for _ in range(200):
        S, q = rng.random((5, 2)), rng.random(2)
        A2 = DiagonalTransform(rng.uniform(1, 2, 2))
        A1 = DiagonalTransform(np.clip(A2.eigenvalues * rng.uniform(1 / 1.2, 1.2, 2), 1, 2))
        ratio, bound = check_kernel_stability(A1, A2, S, q, int(rng.integers(5)), epsilon=0.2)
        worst = max(worst, max(ratio / bound, 1 / (ratio * bound)))
        sums = abs(prediction_probs(A1, S, q).sum() - 1)
        if sums > 1e-12:
            return False, "probabilities do not sum to 1"
    return worst <= 1.0, f"tightest sandwich ratio {worst:.3g}"


def check_net(rng):
    S, f = rng.random((15, 1)), (rng.random(15) < 0.5).astype(float)
    X = rng.random((300, 1))
    y = (rng.random(300) < 0.5).astype(float)
    coarse, fine, gap = check_net_sufficiency((S, f), (X, y), 0.5)
    return 0 <= gap <= 7.5, f"gap {gap:.3g}"


def check_net_grid(rng):
    sizes = [len(epsilon_net(1, e)) for e in (1.0, 0.5, 0.2)]
    return sizes == [2, 3, 5], f"grid sizes {sizes}"


def check_constants(rng):
    c = Constants()
    got = (c.n_eval(0.2), c.sample_cap(0.2, 1), c.nw_draws(0.2, 0.1, 2))
    return got == (25, 503, 139), f"n_eval, cap, M = {got}"


CHECKS = {
    "erm_matches_value_grid": check_erm_grid,
    "mcshane_envelopes": check_envelopes,
    "partition_tiles_domain": check_partition_tiling,
    "short_mass_at_most_epsilon": check_short_mass,
    "session_is_lipschitz": check_session_lipschitz,
    "kernel_stability": check_kernel,
    "net_sufficiency": check_net,
    "net_grid_sizes": check_net_grid,
    "sample_size_formulas": check_constants,
}


def run_properties(seed=0, names=None):
    unknown = sorted(set(names or ()) - set(CHECKS))
    if unknown:
        raise ValueError(f"unknown checks {unknown}; choose from {sorted(CHECKS)}")
    rows = []
    for name, check in CHECKS.items():
        if names and name not in names:
            continue
        try:
            passed, detail = check(stream(seed, "audit"))
        except Exception as exc:  # a crash is a failed check, reported with its message
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        rows.append({"check": name, "seed": int(seed), "passed": bool(passed), "detail": detail})
    return rows
