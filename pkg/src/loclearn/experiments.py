"""Per-seed experiment runs and their result tables."""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from loclearn.config import config_distribution, parse_config
from loclearn.distributions import PointSetX, SyntheticDistribution, require_binary
from loclearn.estimation import estimate_error, oracle_dataset, oracle_error
from loclearn.io import read_dataset, table_csv
from loclearn.learner import UnlabeledPool, budget_report, new_session, query
from loclearn.nw import NwDataset, epsilon_net, exact_nw_losses, nw_error
from loclearn.partition import preprocess
from loclearn.properties import run_properties
from loclearn.rng import stream

BASE_COLUMNS = [
    "mode", "seed", "L", "epsilon", "dims", "estimate", "oracle", "gap", "success",
    "n_fresh_labels", "n_pool_labels", "pool_size", "sample_cap",
    "n_multiplier", "pool_multiplier", "cap_multiplier", "m_multiplier",
]
NW_COLUMNS = ["delta", "N", "M", "net_size", "kde_mode", "argmin_eigenvalues"]
PROPERTY_COLUMNS = ["mode", "seed", "check", "passed", "detail"]


@dataclass
class ExperimentResult:
    columns: list
    rows: list
    passed: bool

    def to_csv(self):
        return table_csv(self.rows, self.columns)


def _local_query(cfg, dist, seed):
    c = cfg.constants
    pool_size, cap = c.pool_size(cfg.L, cfg.epsilon, cfg.dims), c.sample_cap(cfg.epsilon, cfg.dims)
    session = new_session(
        preprocess(cfg.L, cfg.epsilon, cfg.dims, seed), UnlabeledPool.draw(dist, pool_size, seed), dist, cap
    )
    X, y = dist.sample(cfg.n_queries, stream(seed, "eval"))
    risk = float(np.abs(query(session, X) - y).mean())
    base = oracle_error(cfg.L, cfg.dims, *oracle_dataset(dist, cfg.n_baseline, seed))
    gap = risk - base
    return {
        "estimate": risk, "oracle": base, "gap": gap, "success": bool(gap <= cfg.epsilon),
        "n_fresh_labels": cfg.n_queries, "n_pool_labels": budget_report(session)["distinct_labels"],
        "pool_size": pool_size, "sample_cap": cap,
    }


def _error_est(cfg, dist, seed):
    est = estimate_error(cfg.L, cfg.epsilon, cfg.dims, dist, seed, cfg.constants)
    base = oracle_error(cfg.L, cfg.dims, *oracle_dataset(dist, cfg.n_baseline, seed))
    gap = abs(est.value - base)
    return {
        "estimate": est.value, "oracle": base, "gap": gap, "success": bool(gap <= cfg.epsilon),
        "n_fresh_labels": est.n_fresh_labels, "n_pool_labels": est.n_pool_labels,
        "pool_size": est.pool_size, "sample_cap": est.sample_cap,
    }


def nw_inputs(cfg, seed):
    """Dataset and distribution for an NW run: the CSV point set if given, else a synthetic draw."""
    if cfg.data:
        X, y = read_dataset(cfg.data)
        if y is None:
            raise ValueError(f"{cfg.data}: NW mode needs a y column")
        y = require_binary(y)
        dist = cfg.distribution or SyntheticDistribution(
            dims=X.shape[1], marginal=PointSetX(points=X.tolist(), labels=y.tolist()),
            target={"kind": "constant", "c": 0.0},
        )
        return NwDataset.from_labels(X, y), dist
    dist = config_distribution(cfg)
    return NwDataset.draw(dist, cfg.N, seed), dist


def _nw_est(cfg, _dist, seed):
    dataset, dist = nw_inputs(cfg, seed)
    est = nw_error(dataset, dist, cfg.epsilon, cfg.delta, seed, cfg.kde_mode, cfg.constants)
    eval_set = dist.sample(cfg.n_baseline, stream(seed, "oracle"))
    base = min(exact_nw_losses(epsilon_net(dataset.dims, cfg.epsilon), dataset, eval_set))
    gap = abs(est.value - base)
    return {
        "dims": dataset.dims, "estimate": est.value, "oracle": base, "gap": gap, "success": bool(gap <= cfg.epsilon),
        "n_fresh_labels": est.M, "n_pool_labels": est.n_labels, "pool_size": est.N, "sample_cap": "",
        "delta": cfg.delta, "N": est.N, "M": est.M, "net_size": est.net_size, "kde_mode": est.kde_mode,
        "argmin_eigenvalues": est.argmin_eigenvalues,
    }


RUNNERS = {"LOCAL_QUERY": _local_query, "ERROR_EST": _error_est, "NW_EST": _nw_est}


def run_seed(cfg, seed):
    """Rows for one seed (one row, or one per check in the property suite)."""
    start = time.perf_counter()
    if cfg.mode == "PROPERTY_SUITE":
        rows = [{"mode": cfg.mode, **r} for r in run_properties(seed)]
    else:
        dist = None if cfg.mode == "NW_EST" else config_distribution(cfg)
        row = {"mode": cfg.mode, "seed": int(seed), "L": cfg.L, "epsilon": cfg.epsilon, "dims": cfg.dims}
        row.update(RUNNERS[cfg.mode](cfg, dist, seed))
        row.update(cfg.constants.model_dump())
        rows = [row]
    if cfg.timing:
        for r in rows:
            r["wall_time"] = time.perf_counter() - start
    return rows


def _run_seed_doc(doc, seed):
    return run_seed(parse_config(doc), seed)


def _summary(cfg, rows):
    if cfg.mode == "PROPERTY_SUITE":
        passed = all(r["passed"] for r in rows)
        return {"mode": cfg.mode, "seed": "summary", "check": "all", "passed": passed,
                "detail": f"{sum(r['passed'] for r in rows)}/{len(rows)} checks passed"}
    ok = [r["success"] for r in rows]
    return {
        "mode": cfg.mode, "seed": "summary", "L": cfg.L, "epsilon": cfg.epsilon, "dims": rows[0]["dims"],
        "estimate": float(np.mean([r["estimate"] for r in rows])),
        "oracle": float(np.mean([r["oracle"] for r in rows])),
        "gap": float(np.max([r["gap"] for r in rows])),
        "success": float(np.mean(ok)),
        **cfg.constants.model_dump(),
    }


def run_experiment(config):
    """Run every seed of ``config`` (a mapping or an ExperimentConfig).

    Returns one row per seed plus a summary row. For estimation modes the
    summary's ``success`` is the fraction of seeds whose gap is at most
    epsilon; for the property suite it records whether every check passed.
    Raises ``ConfigError`` for invalid configurations.
    """
    cfg = config if not isinstance(config, dict) else parse_config(config)
    if cfg.workers > 1 and len(cfg.seeds) > 1:
        doc = cfg.model_dump(mode="json")
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_seed = list(pool.map(_run_seed_doc, [doc] * len(cfg.seeds), cfg.seeds))
    else:
        per_seed = [run_seed(cfg, s) for s in cfg.seeds]
    rows = [r for rs in per_seed for r in rs]
    summary = _summary(cfg, rows)
    if cfg.mode == "PROPERTY_SUITE":
        columns = list(PROPERTY_COLUMNS)
        passed = summary["passed"]
    else:
        columns = BASE_COLUMNS + (NW_COLUMNS if cfg.mode == "NW_EST" else [])
        passed = True
    if cfg.timing:
        columns.append("wall_time")
    return ExperimentResult(columns, rows + [summary], passed)
