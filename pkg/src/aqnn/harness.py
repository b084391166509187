"""Experiment runner: repeated trials, baselines, sweeps, coverage checks.

A run is a grid of cells (algorithm x query x trial). Every cell derives
its randomness from the root seed and its own indices, so results are
independent of execution order and bit-reproducible; algorithms within one
(query, trial) pair share the same sample and pilot so per-trial
comparisons are paired. Ground truth per (query, radius) is computed once
by brute force over the full population and its oracle calls are accounted
separately from the pipeline ledgers.

Wall-clock timings are collected per cell but quarantined from the
canonical report payload (they can never be bit-reproducible); request
them explicitly via ``include_timing``.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .aggregate import SCOPE_SAMPLE, SCOPE_TRUTH, AggregationContext, aggregate, relative_error
from .bounds import BoundsInput, min_sizes_count, min_sizes_sum, min_sizes_value, reconcile_sizes
from .dataset import Dataset, SyntheticGenConfig, generate_synthetic
from .errors import DegenerateNeighborhoodError, UsageError
from .frnn import NeighborSet, distances_from, exact_frnn, prf1, top_k_baseline
from .models import CallLedger, EmbeddingModel, embed_many, oracle_model, proxy_model, speedup
from .seeding import derive_seed, spawn_rng
from .sprint import (
    QuerySpec,
    SelectionContext,
    SprintConfig,
    draw_pilot,
    draw_sample,
    resolve_query_object,
    select_neighbors,
    sprint_c,
    sprint_v,
    two_phase,
)
from .stats import Hypothesis, ht_accuracy, t_test_one_sample, z_test_proportion

SWEEP_AXES = ("dataset_size", "sample_size", "pilot_size", "radius")

SEARCH_ALGORITHMS = ("sprint_v", "sprint_c", "two_phase")


def parse_algorithm(spec: str) -> tuple[str, float | None]:
    """Split an algorithm spec like ``pqe_pt_fixed:0.95`` into (name, param)."""
    if spec.startswith("pqe_pt_fixed"):
        _, _, raw = spec.partition(":")
        if not raw:
            raise UsageError("pqe_pt_fixed needs a target, e.g. pqe_pt_fixed:0.95")
        t = float(raw)
        if not 0.0 <= t <= 1.0:
            raise UsageError("fixed precision target must lie in [0, 1]")
        return "pqe_pt_fixed", t
    if spec in SEARCH_ALGORITHMS or spec in ("top_k", "brute_force"):
        return spec, None
    raise UsageError(f"unknown algorithm {spec!r}")


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    grid: tuple

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"sweep axis must be one of {SWEEP_AXES}")
        if len(self.grid) < 1:
            raise ValueError("sweep grid must be nonempty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")


@dataclass
class ExperimentConfig:
    dataset: Dataset | None
    query_ids: Sequence[int]
    r: float
    aggs: Sequence[str]
    algorithms: Sequence[str]
    sprint: SprintConfig
    trials: int = 30
    seed: int = 0
    metric: str = "euclidean"
    oracle: EmbeddingModel = field(default_factory=oracle_model)
    proxy: EmbeddingModel = field(default_factory=proxy_model)
    sweep: SweepSpec | None = None
    gen_config: SyntheticGenConfig | None = None  # required for dataset_size sweeps

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if not self.query_ids:
            raise ValueError("need at least one query target")
        if not self.aggs:
            raise ValueError("need at least one aggregation")
        for spec in self.algorithms:
            parse_algorithm(spec)
        if self.dataset is None and self.gen_config is None:
            raise ValueError("need a dataset or a generator config")


@dataclass
class GroundTruth:
    on_d: NeighborSet
    agg_values: dict[str, float | None]  # None where undefined (degenerate)
    density: float
    oracle_calls: int


@dataclass
class CellResult:
    algorithm: str
    query_id: int
    trial: int
    estimates: dict[str, float | None]
    re_pct: dict[str, float | None]
    f1_s: float | None
    pr_gap: float | None
    t_star: float | None
    oracle_calls: int
    proxy_calls: int
    selected: int
    degenerate: bool
    note: str
    wall_time_s: float
    sweep_value: float | None = None


@dataclass
class MetricsReport:
    seed: int
    config: dict
    ground_truth: dict
    cells: list[CellResult]
    summary: dict
    sweep: list[dict] | None = None

    def to_json_dict(self, include_timing: bool = False) -> dict:
        cells = []
        for c in self.cells:
            row = {
                "algorithm": c.algorithm,
                "query_id": c.query_id,
                "trial": c.trial,
                "estimates": c.estimates,
                "re_pct": c.re_pct,
                "f1_s": c.f1_s,
                "pr_gap": c.pr_gap,
                "t_star": c.t_star,
                "oracle_calls": c.oracle_calls,
                "proxy_calls": c.proxy_calls,
                "selected": c.selected,
                "degenerate": c.degenerate,
                "note": c.note,
            }
            if c.sweep_value is not None:
                row["sweep_value"] = c.sweep_value
            if include_timing:
                row["wall_time_s"] = c.wall_time_s
            cells.append(row)
        out = {
            "seed": self.seed,
            "config": self.config,
            "ground_truth": self.ground_truth,
            "cells": cells,
            "summary": self.summary,
        }
        if self.sweep is not None:
            out["sweep"] = self.sweep
        return out

    def to_json(self, include_timing: bool = False) -> str:
        return json.dumps(self.to_json_dict(include_timing), sort_keys=True, indent=2) + "\n"

    def to_csv_rows(self) -> list[dict]:
        rows = []
        for c in self.cells:
            base = {
                "algorithm": c.algorithm,
                "query_id": c.query_id,
                "trial": c.trial,
                "f1_s": c.f1_s,
                "pr_gap": c.pr_gap,
                "t_star": c.t_star,
                "oracle_calls": c.oracle_calls,
                "proxy_calls": c.proxy_calls,
                "selected": c.selected,
                "degenerate": c.degenerate,
                "wall_time_s": c.wall_time_s,
            }
            for agg, re in c.re_pct.items():
                base[f"re_{agg.lower()}"] = re
                base[f"estimate_{agg.lower()}"] = c.estimates.get(agg)
            rows.append(base)
        return rows


def ground_truth(
    ds: Dataset,
    query: QuerySpec,
    oracle: EmbeddingModel,
    aggs: Sequence[str] | None = None,
) -> GroundTruth:
    """Brute-force oracle neighborhood over all of D plus exact aggregates.

    Charges |D| oracle calls (plus the query target) to a dedicated ledger
    whose total is reported in the result.
    """
    aggs = list(aggs) if aggs is not None else [query.agg]
    ledger = CallLedger()
    q_obj = resolve_query_object(ds, query.q_id)
    q_emb = oracle.embed(q_obj, ledger)
    embeddings = embed_many(oracle, ds, ds.ids, ledger)
    on_d = exact_frnn(ds.ids, embeddings, q_emb, query.r, query.metric, space="oracle")

    members = sorted(on_d.member_ids)
    values = ds.attrs[list(members)] if members else np.empty(0)
    ctx = AggregationContext(
        sample_size_s=len(ds), population_size_D=len(ds), scope=SCOPE_TRUTH
    )
    agg_values: dict[str, float | None] = {}
    for agg in aggs:
        try:
            agg_values[agg] = aggregate(agg, values, len(members), ctx)
        except DegenerateNeighborhoodError:
            agg_values[agg] = None
    return GroundTruth(
        on_d=on_d,
        agg_values=agg_values,
        density=len(members) / len(ds),
        oracle_calls=ledger.oracle_calls,
    )


def _select_for_algorithm(
    algorithm: str,
    fixed_t: float | None,
    ds: Dataset,
    query: QuerySpec,
    cfg: SprintConfig,
    oracle: EmbeddingModel,
    proxy: EmbeddingModel,
    sample_ids: np.ndarray,
    pilot_ids: np.ndarray,
    ledger: CallLedger,
) -> tuple[NeighborSet, float | None, str]:
    """Run one algorithm's selection; returns (set, t_star, note)."""
    q_obj = resolve_query_object(ds, query.q_id)

    if algorithm == "brute_force":
        # Exact path: oracle embeddings for the entire population.
        q_emb = oracle.embed(q_obj, ledger)
        embeddings = embed_many(oracle, ds, ds.ids, ledger)
        on_d = exact_frnn(ds.ids, embeddings, q_emb, query.r, query.metric, space="oracle")
        return (
            NeighborSet(on_d.member_ids, "oracle", "brute_force", on_d.threshold_used),
            None,
            "",
        )

    if algorithm == "top_k":
        # Oracle labels over the whole sample set the budget K = |ON_S|.
        q_oracle = oracle.embed(q_obj, ledger)
        q_proxy = proxy.embed(q_obj, ledger)
        oracle_embs = embed_many(oracle, ds, sample_ids, ledger)
        on_s = exact_frnn(
            sample_ids, oracle_embs, q_oracle, query.r, query.metric, space="oracle"
        )
        k = len(on_s)
        if k == 0:
            return NeighborSet(frozenset(), "proxy", "top_k", None), None, "K=0"
        proxy_embs = embed_many(proxy, ds, sample_ids, ledger)
        proxy_d = distances_from(query.metric, q_proxy, proxy_embs)
        dists = {int(i): float(d) for i, d in zip(sample_ids, proxy_d)}
        chosen = top_k_baseline(dists, k)
        return chosen, None, ""

    ctx = SelectionContext.build(
        ds,
        q_obj,
        query.r,
        query.metric,
        sample_ids,
        pilot_ids,
        oracle,
        proxy,
        ledger,
        delta=cfg.alpha,
    )
    if algorithm == "pqe_pt_fixed":
        chosen = ctx.select_on_sample(fixed_t, f"pqe_pt_fixed:{fixed_t:g}")
        return chosen, fixed_t, ""
    if algorithm == "sprint_v":
        out = sprint_v(ctx, cfg.omega_v)
    elif algorithm == "sprint_c":
        out = sprint_c(ctx, cfg.omega_c, cfg.max_iters)
    else:
        out = two_phase(ctx, cfg.omega_c, cfg.omega_v, cfg.max_iters)
    return out.neighbors, out.t_star, ""


def _evaluate_cell(
    algorithm: str,
    query_id: int,
    trial: int,
    chosen: NeighborSet,
    t_star: float | None,
    note: str,
    ds: Dataset,
    aggs: Sequence[str],
    cfg: SprintConfig,
    gt: GroundTruth,
    on_s: NeighborSet,
    ledger: CallLedger,
    wall_time_s: float,
) -> CellResult:
    members = sorted(chosen.member_ids)
    values = ds.attrs[list(members)] if members else np.empty(0)
    if algorithm == "brute_force":
        ctx = AggregationContext(len(ds), len(ds), SCOPE_TRUTH)
        truth_for_f1 = gt.on_d
    else:
        ctx = AggregationContext(cfg.s, len(ds), SCOPE_SAMPLE)
        truth_for_f1 = on_s

    estimates: dict[str, float | None] = {}
    re_pct: dict[str, float | None] = {}
    degenerate = False
    for agg in aggs:
        truth_val = gt.agg_values.get(agg)
        try:
            est = aggregate(agg, values, len(members), ctx)
        except DegenerateNeighborhoodError:
            est = None
        estimates[agg] = est
        if est is None or truth_val is None or truth_val == 0:
            re_pct[agg] = None
            degenerate = True
            if not note:
                note = "degenerate aggregate"
        else:
            re_pct[agg] = relative_error(est, truth_val)

    p, r, f1 = prf1(chosen, truth_for_f1)
    return CellResult(
        algorithm=algorithm,
        query_id=query_id,
        trial=trial,
        estimates=estimates,
        re_pct=re_pct,
        f1_s=f1,
        pr_gap=abs(p - r),
        t_star=t_star,
        oracle_calls=ledger.oracle_calls,
        proxy_calls=ledger.proxy_calls,
        selected=len(members),
        degenerate=degenerate,
        note=note,
        wall_time_s=wall_time_s,
    )


def _run_block(cfg: ExperimentConfig, ds: Dataset, gts: dict[int, GroundTruth],
               qi: int, trial: int) -> list[CellResult]:
    """All algorithms for one (query, trial) pair, sharing sample and pilot."""
    query_id = int(cfg.query_ids[qi])
    cell_seed = derive_seed(cfg.seed, "cell", qi, trial)
    sample_ids = draw_sample(ds, cfg.sprint.s, spawn_rng(cell_seed, "sample"))
    pilot_ids = draw_pilot(sample_ids, cfg.sprint.s_p, spawn_rng(cell_seed, "pilot"))
    gt = gts[query_id]
    # Evaluation-only truth within the sample; charged to no ledger.
    on_s = NeighborSet(
        gt.on_d.member_ids & frozenset(int(i) for i in sample_ids),
        "oracle",
        "exact_frnn",
        gt.on_d.threshold_used,
    )

    results = []
    for spec in cfg.algorithms:
        algorithm, fixed_t = parse_algorithm(spec)
        query = QuerySpec(q_id=query_id, r=cfg.r, agg=cfg.aggs[0], metric=cfg.metric)
        ledger = CallLedger()
        start = time.perf_counter()
        try:
            chosen, t_star, note = _select_for_algorithm(
                algorithm, fixed_t, ds, query, cfg.sprint, cfg.oracle, cfg.proxy,
                sample_ids, pilot_ids, ledger,
            )
        except DegenerateNeighborhoodError as exc:
            elapsed = time.perf_counter() - start
            results.append(
                CellResult(
                    algorithm=spec, query_id=query_id, trial=trial,
                    estimates={a: None for a in cfg.aggs},
                    re_pct={a: None for a in cfg.aggs},
                    f1_s=None, pr_gap=None, t_star=None,
                    oracle_calls=ledger.oracle_calls, proxy_calls=ledger.proxy_calls,
                    selected=0, degenerate=True, note=str(exc), wall_time_s=elapsed,
                )
            )
            continue
        cell = _evaluate_cell(
            spec, query_id, trial, chosen, t_star, note, ds, cfg.aggs, cfg.sprint,
            gt, on_s, ledger, 0.0,
        )
        cell.wall_time_s = time.perf_counter() - start
        results.append(cell)
    return results


_FORK_STATE: dict = {}


def _run_block_by_index(idx: int) -> list[CellResult]:
    cfg = _FORK_STATE["cfg"]
    ds = _FORK_STATE["ds"]
    gts = _FORK_STATE["gts"]
    n_trials = cfg.trials
    qi, trial = divmod(idx, n_trials)
    return _run_block(cfg, ds, gts, qi, trial)


def _summarize(cfg: ExperimentConfig, ds: Dataset, cells: list[CellResult]) -> dict:
    """Per-algorithm means and spreads; degenerate metrics excluded per field."""
    cost_ratio = cfg.oracle.cost_weight / cfg.proxy.cost_weight
    summary: dict = {}
    for spec in cfg.algorithms:
        rows = [c for c in cells if c.algorithm == spec]
        entry: dict = {
            "cells": len(rows),
            "degenerate_cells": sum(1 for c in rows if c.degenerate),
            "oracle_calls_mean": float(np.mean([c.oracle_calls for c in rows])),
            "proxy_calls_mean": float(np.mean([c.proxy_calls for c in rows])),
        }
        f1s = [c.f1_s for c in rows if c.f1_s is not None]
        gaps = [c.pr_gap for c in rows if c.pr_gap is not None]
        if f1s:
            entry["f1_mean"] = float(np.mean(f1s))
            entry["f1_sd"] = float(np.std(f1s))
        if gaps:
            entry["pr_gap_mean"] = float(np.mean(gaps))
            entry["pr_gap_sd"] = float(np.std(gaps))
        entry["re_pct"] = {}
        for agg in cfg.aggs:
            res = [c.re_pct[agg] for c in rows if c.re_pct.get(agg) is not None]
            if res:
                entry["re_pct"][agg] = {
                    "mean": float(np.mean(res)),
                    "sd": float(np.std(res)),
                    "n": len(res),
                }
        entry["speedup"] = speedup(
            len(ds),
            entry["oracle_calls_mean"],
            entry["proxy_calls_mean"],
            cost_ratio,
        )
        summary[spec] = entry
    return summary


def _config_digest(cfg: ExperimentConfig, ds: Dataset) -> dict:
    return {
        "population_size": len(ds),
        "query_ids": [int(q) for q in cfg.query_ids],
        "r": cfg.r,
        "metric": cfg.metric,
        "aggs": list(cfg.aggs),
        "algorithms": list(cfg.algorithms),
        "s": cfg.sprint.s,
        "s_p": cfg.sprint.s_p,
        "omega_v": cfg.sprint.omega_v,
        "omega_c": cfg.sprint.omega_c,
        "alpha": cfg.sprint.alpha,
        "max_iters": cfg.sprint.max_iters,
        "trials": cfg.trials,
        "cost_ratio": cfg.oracle.cost_weight / cfg.proxy.cost_weight,
    }


def _materialize_dataset(cfg: ExperimentConfig) -> Dataset:
    if cfg.dataset is not None:
        return cfg.dataset
    return generate_synthetic(cfg.gen_config)


def _run_single(cfg: ExperimentConfig, parallel: int = 0) -> MetricsReport:
    ds = _materialize_dataset(cfg)
    gts: dict[int, GroundTruth] = {}
    for q in cfg.query_ids:
        query = QuerySpec(q_id=int(q), r=cfg.r, agg=cfg.aggs[0], metric=cfg.metric)
        gts[int(q)] = ground_truth(ds, query, cfg.oracle, cfg.aggs)

    n_blocks = len(cfg.query_ids) * cfg.trials
    if parallel and parallel > 1:
        import concurrent.futures
        import multiprocessing

        _FORK_STATE.update({"cfg": cfg, "ds": ds, "gts": gts})
        try:
            mp_ctx = multiprocessing.get_context("fork")
            with concurrent.futures.ProcessPoolExecutor(
                max_workers=parallel, mp_context=mp_ctx
            ) as pool:
                blocks = list(pool.map(_run_block_by_index, range(n_blocks)))
        finally:
            _FORK_STATE.clear()
    else:
        blocks = [
            _run_block(cfg, ds, gts, qi, trial)
            for qi in range(len(cfg.query_ids))
            for trial in range(cfg.trials)
        ]
    cells = [cell for block in blocks for cell in block]

    gt_payload = {
        str(q): {
            "agg": gts[int(q)].agg_values,
            "on_d_size": len(gts[int(q)].on_d),
            "density": gts[int(q)].density,
            "oracle_calls": gts[int(q)].oracle_calls,
        }
        for q in cfg.query_ids
    }
    return MetricsReport(
        seed=cfg.seed,
        config=_config_digest(cfg, ds),
        ground_truth=gt_payload,
        cells=cells,
        summary=_summarize(cfg, ds, cells),
    )


def _vary(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    import dataclasses

    if axis == "dataset_size":
        if cfg.gen_config is None:
            raise ValueError("dataset_size sweeps need a generator config")
        gen = dataclasses.replace(cfg.gen_config, n_objects=int(value))
        return dataclasses.replace(cfg, dataset=None, gen_config=gen, sweep=None)
    if axis == "sample_size":
        sp = dataclasses.replace(cfg.sprint, s=int(value))
        return dataclasses.replace(cfg, sprint=sp, sweep=None)
    if axis == "pilot_size":
        sp = dataclasses.replace(cfg.sprint, s_p=int(value))
        return dataclasses.replace(cfg, sprint=sp, sweep=None)
    # radius
    return dataclasses.replace(cfg, r=float(value), sweep=None)


def run_experiment(cfg: ExperimentConfig, parallel: int = 0) -> MetricsReport:
    """Execute the configured grid; with a sweep, one pass per grid value.

    Sweeps hold the root seed fixed across passes so only the swept factor
    changes. Per-radius sweeps report the achieved neighborhood density so
    instability at sparse radii stays attributable.
    """
    if cfg.sweep is None:
        return _run_single(cfg, parallel)

    passes = []
    for value in cfg.sweep.grid:
        sub = _vary(cfg, cfg.sweep.axis, value)
        report = _run_single(sub, parallel)
        for cell in report.cells:
            cell.sweep_value = float(value)
        entry = {
            "value": float(value),
            "summary": report.summary,
            "density": {
                q: report.ground_truth[q]["density"] for q in report.ground_truth
            },
            "mean_wall_time_s": float(np.mean([c.wall_time_s for c in report.cells])),
        }
        passes.append((entry, report))

    base = passes[0][1]
    return MetricsReport(
        seed=cfg.seed,
        config=dict(base.config, sweep_axis=cfg.sweep.axis, sweep_grid=list(cfg.sweep.grid)),
        ground_truth=base.ground_truth,
        cells=[c for _, rep in passes for c in rep.cells],
        summary=base.summary,
        sweep=[entry for entry, _ in passes],
    )


@dataclass
class CoverageResult:
    coverage: float
    trials: int
    s: int
    s_p: int
    tolerance: float
    failures: int


def coverage_check(
    ds: Dataset,
    query: QuerySpec,
    oracle: EmbeddingModel,
    proxy: EmbeddingModel,
    alpha: float,
    omega_s: float,
    omega_nn: float,
    omega_c: float = 0.0001,
    lambda_: float = 1.0,
    trials: int = 200,
    seed: int = 0,
    bound_source: str | None = None,
) -> CoverageResult:
    """Fraction of independent runs landing within omega_s + omega_nn.

    Sample and pilot sizes come from the bound calculator matching the
    query's sensitivity, or from the explicitly requested family
    ("value", "count", "sum"); the neighborhood density input is estimated
    from the brute-force ground truth.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    gt = ground_truth(ds, query, oracle, [query.agg])
    truth = gt.agg_values[query.agg]
    if truth is None:
        raise DegenerateNeighborhoodError("ground-truth neighborhood is empty")
    rho = max(gt.density, 1.0 / len(ds))

    a, b = ds.attr_bounds
    inp = BoundsInput(
        alpha=alpha,
        rho=rho,
        a=a,
        b=b,
        omega_s=omega_s,
        omega_nn=omega_nn,
        omega_c=omega_c,
        lambda_=lambda_,
        population_size_D=len(ds),
        avg_s_abs=abs(gt.agg_values[query.agg]) if query.agg == "SUM" else None,
        on_d_size=len(gt.on_d) if query.agg == "SUM" else None,
        bounds_data_derived=ds.bounds_source == "data",
    )
    source = bound_source or {"value": "value", "count": "count", "both": "sum"}[
        query.sensitivity
    ]
    if source == "value":
        out = min_sizes_value(query.agg if query.agg in ("AVG", "VAR") else "AVG", inp)
    elif source == "count":
        out = min_sizes_count(query.agg if query.agg in ("PCT", "COUNT") else "PCT", inp)
    else:
        out = min_sizes_sum(inp)
    out = reconcile_sizes(out)
    s = min(out.s_min, len(ds))
    s_p = min(out.s_p_min, s)

    tolerance = omega_s + omega_nn
    failures = 0
    for trial in range(trials):
        cfg = SprintConfig(
            s=s, s_p=s_p, alpha=alpha, seed=derive_seed(seed, "coverage", trial)
        )
        try:
            res = select_neighbors(query, cfg, ds, oracle, proxy)
        except DegenerateNeighborhoodError:
            failures += 1
            continue
        members = sorted(res.neighbors.member_ids)
        values = ds.attrs[list(members)] if members else np.empty(0)
        ctx = AggregationContext(s, len(ds), SCOPE_SAMPLE)
        try:
            est = aggregate(query.agg, values, len(members), ctx)
        except DegenerateNeighborhoodError:
            failures += 1
            continue
        if abs(est - truth) > tolerance:
            failures += 1
    return CoverageResult(
        coverage=1.0 - failures / trials,
        trials=trials,
        s=s,
        s_p=s_p,
        tolerance=tolerance,
        failures=failures,
    )


def default_ht_factors() -> list[float]:
    """The hypothesis grid: multiples of the truth from 0.5 to 1.5 by 0.05."""
    return [round(0.5 + 0.05 * i, 2) for i in range(21)]


def run_ht_protocol(
    ds: Dataset,
    query_ids: Sequence[int],
    r: float,
    agg: str,
    sprint_cfg: SprintConfig,
    oracle: EmbeddingModel | None = None,
    proxy: EmbeddingModel | None = None,
    factors: Sequence[float] | None = None,
    ops: Sequence[str] = ("ge", "le"),
    k_samples: int = 30,
    alpha: float = 0.05,
    metric: str = "euclidean",
    seed: int = 0,
) -> dict:
    """Decision-agreement protocol for hypothesis testing on estimates.

    For every (query, factor, op) cell the hypothesized constant is
    factor x ground-truth aggregate; the truth decision tests the exact
    neighborhood, and k_samples fresh pipeline runs produce the estimated
    decisions scored against it. AVG uses the t-test on neighbor values,
    PCT the proportion z-test on the neighborhood fraction.
    """
    if agg not in ("AVG", "PCT"):
        raise ValueError("hypothesis-testing protocol covers AVG and PCT")
    oracle = oracle or oracle_model()
    proxy = proxy or proxy_model()
    factors = list(factors) if factors is not None else default_ht_factors()

    per_cell = []
    per_factor: dict[float, list[float]] = {f: [] for f in factors}
    skipped = 0
    for qi, q in enumerate(query_ids):
        query = QuerySpec(q_id=int(q), r=r, agg=agg, metric=metric)
        gt = ground_truth(ds, query, oracle, [agg])
        truth_val = gt.agg_values[agg]
        if truth_val is None or truth_val == 0:
            skipped += 1
            continue
        truth_members = sorted(gt.on_d.member_ids)
        truth_values = ds.attrs[list(truth_members)]

        # One selection per (query, trial), reused across factors and ops.
        trial_selections = []
        for trial in range(k_samples):
            cfg_trial = SprintConfig(
                s=sprint_cfg.s,
                s_p=sprint_cfg.s_p,
                omega_v=sprint_cfg.omega_v,
                omega_c=sprint_cfg.omega_c,
                alpha=sprint_cfg.alpha,
                max_iters=sprint_cfg.max_iters,
                seed=derive_seed(seed, "ht", qi, trial),
            )
            res = select_neighbors(query, cfg_trial, ds, oracle, proxy)
            members = sorted(res.neighbors.member_ids)
            trial_selections.append(members)

        for factor in factors:
            c = factor * truth_val
            for op in ops:
                try:
                    if agg == "AVG":
                        h = Hypothesis(agg="AVG", op=op, c=c, alpha=alpha)
                        truth_decision = t_test_one_sample(truth_values, h).reject_null
                    else:
                        h = Hypothesis(agg="PCT", op=op, c=c, alpha=alpha)
                        truth_decision = z_test_proportion(
                            len(truth_members) / len(ds), len(ds), h
                        ).reject_null
                except ValueError as exc:
                    per_cell.append(
                        {"query_id": int(q), "factor": factor, "op": op,
                         "accuracy": None, "note": str(exc)}
                    )
                    continue

                est_decisions = []
                ok = True
                for members in trial_selections:
                    try:
                        if agg == "AVG":
                            d = t_test_one_sample(ds.attrs[list(members)], h).reject_null
                        else:
                            d = z_test_proportion(
                                len(members) / sprint_cfg.s, sprint_cfg.s, h
                            ).reject_null
                    except ValueError:
                        ok = False
                        break
                    est_decisions.append(d)
                if not ok:
                    per_cell.append(
                        {"query_id": int(q), "factor": factor, "op": op,
                         "accuracy": None, "note": "estimate test undefined"}
                    )
                    continue
                acc = ht_accuracy(est_decisions, [truth_decision] * len(est_decisions))
                per_cell.append(
                    {"query_id": int(q), "factor": factor, "op": op,
                     "accuracy": acc, "note": ""}
                )
                per_factor[factor].append(acc)

    factor_means = {
        f: (float(np.mean(v)) if v else None) for f, v in per_factor.items()
    }
    defined = [x for x in factor_means.values() if x is not None]
    return {
        "agg": agg,
        "factors": factors,
        "ops": list(ops),
        "k_samples": k_samples,
        "cells": per_cell,
        "accuracy_by_factor": factor_means,
        "mean_accuracy": float(np.mean(defined)) if defined else None,
        "skipped_queries": skipped,
    }
