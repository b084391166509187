"""The sampling + calibrated-selection pipeline.

Three steps: draw a uniform sample S of the population, draw an
oracle-labeled pilot within it, then pick neighbors in S with a
precision-target search calibrated on the pilot. Value-sensitive
aggregates (AVG, VAR) get a ternary search maximizing pilot F1;
count-sensitive ones (PCT, COUNT) get a binary search balancing pilot
precision against recall; SUM runs the balance search first and then
refines the target within +-0.05 for F1.

One root seed drives independent derived streams for the sample and the
pilot, so resizing the pilot never perturbs the sample. The ledger over a
full run charges exactly s proxy calls and s_p oracle calls for sample
objects plus one call of each model for the query target.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dataset import DataObject, Dataset
from .errors import DegenerateNeighborhoodError
from .frnn import NeighborSet, PrecisionTargetConfig, distances_from, pqe_pt, prf1
from .models import CallLedger, EmbeddingModel, embed_many
from .seeding import spawn_rng

SENSITIVITY = {"AVG": "value", "VAR": "value", "PCT": "count", "COUNT": "count", "SUM": "both"}

TWO_PHASE_WINDOW = 0.05  # half-width of the refinement window around the balanced target

_NO_PILOT_TRUE_MSG = "pilot contains no true neighbors; increase s_p or r"


@dataclass(frozen=True)
class SprintConfig:
    """Pipeline parameters: sizes, search tolerances, confidence, seed."""

    s: int
    s_p: int
    omega_v: float = 0.01
    omega_c: float = 0.01
    alpha: float = 0.05
    max_iters: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.s <= 0 or self.s_p <= 0:
            raise ValueError("sample and pilot sizes must be positive")
        if self.s_p > self.s:
            raise ValueError("pilot size cannot exceed sample size")
        if not 0.0 < self.omega_v < 1.0:
            raise ValueError("omega_v must lie in (0, 1)")
        if not 0.0 < self.omega_c < 1.0:
            raise ValueError("omega_c must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")


@dataclass(frozen=True)
class QuerySpec:
    """One aggregation query: target, radius, metric, aggregation."""

    q_id: int | np.ndarray  # object id, or an external feature vector
    r: float
    agg: str
    metric: str = "euclidean"

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("radius must be positive")
        if self.agg not in SENSITIVITY:
            raise ValueError(f"unknown aggregation {self.agg!r}")

    @property
    def sensitivity(self) -> str:
        return SENSITIVITY[self.agg]


def _as_rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return spawn_rng(int(seed_or_rng))


def draw_sample(ds: Dataset, s: int, seed_or_rng) -> np.ndarray:
    """Uniform sample of s object ids without replacement, sorted."""
    if s > len(ds):
        raise ValueError(f"sample size {s} exceeds population {len(ds)}")
    rng = _as_rng(seed_or_rng)
    return np.sort(rng.choice(len(ds), size=s, replace=False)).astype(np.int64)


def draw_pilot(sample_ids: np.ndarray, s_p: int, seed_or_rng) -> np.ndarray:
    """Uniform subsample of the sample, sorted; oracle labels come later."""
    sample_ids = np.asarray(sample_ids, dtype=np.int64)
    if s_p > sample_ids.size:
        raise ValueError(f"pilot size {s_p} exceeds sample size {sample_ids.size}")
    rng = _as_rng(seed_or_rng)
    return np.sort(rng.choice(sample_ids, size=s_p, replace=False)).astype(np.int64)


def ternary_search_max(
    f: Callable[[float], float], omega: float, lo: float = 0.0, hi: float = 1.0
) -> tuple[float, int]:
    """Midpoint of the interval a ternary search shrinks around f's maximum.

    Each iteration drops the worse outer third, so the interval width after
    k iterations is (2/3)^k of the original; for a strictly unimodal f the
    maximizer stays inside. Returns (argmax estimate, iterations).
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    iterations = 0
    while hi - lo > omega:
        t1 = lo + (hi - lo) / 3.0
        t2 = hi - (hi - lo) / 3.0
        if f(t1) > f(t2):
            hi = t2
        else:
            lo = t1
        iterations += 1
    return (lo + hi) / 2.0, iterations


@dataclass(frozen=True)
class SelectionContext:
    """Precomputed state one query's selection algorithms share.

    Proxy distances cover the whole sample; oracle distances only the
    pilot. ``pilot_truth`` is the oracle neighborhood within the pilot.
    """

    sample_ids: np.ndarray
    pilot_ids: np.ndarray
    proxy_dist: dict[int, float]
    pilot_oracle_dist: dict[int, float]
    pilot_truth: NeighborSet
    r: float
    delta: float

    @classmethod
    def build(
        cls,
        ds: Dataset,
        query: DataObject,
        r: float,
        metric: str,
        sample_ids: np.ndarray,
        pilot_ids: np.ndarray,
        oracle: EmbeddingModel,
        proxy: EmbeddingModel,
        ledger: CallLedger,
        delta: float = 0.05,
    ) -> "SelectionContext":
        sample_ids = np.asarray(sample_ids, dtype=np.int64)
        pilot_ids = np.asarray(pilot_ids, dtype=np.int64)
        q_oracle = oracle.embed(query, ledger)
        q_proxy = proxy.embed(query, ledger)

        proxy_embs = embed_many(proxy, ds, sample_ids, ledger)
        proxy_d = distances_from(metric, q_proxy, proxy_embs)
        oracle_embs = embed_many(oracle, ds, pilot_ids, ledger)
        oracle_d = distances_from(metric, q_oracle, oracle_embs)

        pilot_truth = NeighborSet(
            member_ids=frozenset(
                int(i) for i, d in zip(pilot_ids, oracle_d) if d <= r
            ),
            space="oracle",
            method="exact_frnn",
            threshold_used=float(r),
        )
        return cls(
            sample_ids=sample_ids,
            pilot_ids=pilot_ids,
            proxy_dist={int(i): float(d) for i, d in zip(sample_ids, proxy_d)},
            pilot_oracle_dist={int(i): float(d) for i, d in zip(pilot_ids, oracle_d)},
            pilot_truth=pilot_truth,
            r=float(r),
            delta=float(delta),
        )

    def select_on_pilot(self, t: float) -> NeighborSet:
        return pqe_pt(
            self.pilot_ids,
            self.proxy_dist,
            self.pilot_ids,
            self.pilot_truth,
            PrecisionTargetConfig(t=t, delta=self.delta),
            self.r,
        )

    def pilot_prf1(self, t: float) -> tuple[float, float, float]:
        return prf1(self.select_on_pilot(t), self.pilot_truth)

    def select_on_sample(self, t: float, method: str) -> NeighborSet:
        chosen = pqe_pt(
            self.sample_ids,
            self.proxy_dist,
            self.pilot_ids,
            self.pilot_truth,
            PrecisionTargetConfig(t=t, delta=self.delta),
            self.r,
        )
        return NeighborSet(
            member_ids=chosen.member_ids,
            space="mixed",
            method=method,
            threshold_used=chosen.threshold_used,
        )

    def require_pilot_truth(self) -> None:
        if not self.pilot_truth.member_ids:
            raise DegenerateNeighborhoodError(_NO_PILOT_TRUE_MSG)


@dataclass(frozen=True)
class SelectionOutcome:
    neighbors: NeighborSet
    t_star: float
    iterations: int
    probes: int


def sprint_v(ctx: SelectionContext, omega_v: float) -> SelectionOutcome:
    """Maximize pilot F1 by ternary search over the precision target."""
    ctx.require_pilot_truth()
    probes = 0

    def f1_at(t: float) -> float:
        nonlocal probes
        probes += 1
        return ctx.pilot_prf1(t)[2]

    t_star, iterations = ternary_search_max(f1_at, omega_v)
    return SelectionOutcome(
        neighbors=ctx.select_on_sample(t_star, "sprint_v"),
        t_star=t_star,
        iterations=iterations,
        probes=probes,
    )


def _balance_search(
    ctx: SelectionContext, omega_c: float, max_iters: int
) -> tuple[float, int]:
    """Binary search for the target equalizing pilot precision and recall.

    The gap between adjacent cutoffs can jump, so the tolerance may be
    unreachable; the iteration cap bounds the loop and the best-gap target
    seen wins.
    """
    lo, hi = 0.0, 1.0
    best_gap, best_t = None, None
    probes = 0
    for _ in range(max_iters):
        t = (lo + hi) / 2.0
        p, r, _ = ctx.pilot_prf1(t)
        probes += 1
        gap = abs(r - p)
        if best_gap is None or gap < best_gap:
            best_gap, best_t = gap, t
        if gap <= omega_c:
            best_t = t
            break
        if p <= r:
            lo = t
        else:
            hi = t
    return best_t, probes


def sprint_c(ctx: SelectionContext, omega_c: float, max_iters: int = 30) -> SelectionOutcome:
    """Equalize pilot precision and recall by binary search over the target."""
    ctx.require_pilot_truth()
    t_star, probes = _balance_search(ctx, omega_c, max_iters)
    return SelectionOutcome(
        neighbors=ctx.select_on_sample(t_star, "sprint_c"),
        t_star=t_star,
        iterations=probes,
        probes=probes,
    )


def two_phase(
    ctx: SelectionContext, omega_c: float, omega_v: float, max_iters: int = 30
) -> SelectionOutcome:
    """Balance precision and recall, then refine nearby for the best F1.

    Phase 1 finds the balanced target t_c; phase 2 ternary-searches F1 on
    the window [t_c - 0.05, t_c + 0.05] clipped to [0, 1].
    """
    ctx.require_pilot_truth()
    t_c, probes_c = _balance_search(ctx, omega_c, max_iters)
    lo = max(0.0, t_c - TWO_PHASE_WINDOW)
    hi = min(1.0, t_c + TWO_PHASE_WINDOW)
    probes = probes_c

    def f1_at(t: float) -> float:
        nonlocal probes
        probes += 1
        return ctx.pilot_prf1(t)[2]

    t_star, iterations = ternary_search_max(f1_at, omega_v, lo, hi)
    return SelectionOutcome(
        neighbors=ctx.select_on_sample(t_star, "two_phase"),
        t_star=t_star,
        iterations=iterations,
        probes=probes,
    )


@dataclass(frozen=True)
class SelectionResult:
    """A pipeline run's outputs plus the context needed for aggregation."""

    neighbors: NeighborSet
    sample_ids: np.ndarray
    pilot_ids: np.ndarray
    t_star: float
    iterations: int
    probes: int
    ledger: CallLedger


def resolve_query_object(ds: Dataset, q_id) -> DataObject:
    """Turn a query spec target into a DataObject.

    An integer id selects a dataset member. An external feature vector is
    wrapped as a pseudo-object with id -1 whose stored embeddings equal the
    vector itself (simulated models re-derive from it as usual).
    """
    if isinstance(q_id, (int, np.integer)):
        return ds.object(int(q_id))
    vec = np.asarray(q_id, dtype=np.float64)
    return DataObject(
        id=-1, attr_value=float("nan"), features=vec, oracle_embedding=vec, proxy_embedding=vec
    )


def select_neighbors(
    query: QuerySpec,
    cfg: SprintConfig,
    ds: Dataset,
    oracle: EmbeddingModel,
    proxy: EmbeddingModel,
) -> SelectionResult:
    """Run the full pipeline, dispatching on the aggregation's sensitivity.

    AVG and VAR route to the F1-maximizing search, PCT and COUNT to the
    precision-recall balancing search, SUM to the two-phase strategy.
    """
    ledger = CallLedger()
    sample_ids = draw_sample(ds, cfg.s, spawn_rng(cfg.seed, "sample"))
    pilot_ids = draw_pilot(sample_ids, cfg.s_p, spawn_rng(cfg.seed, "pilot"))
    ctx = SelectionContext.build(
        ds,
        resolve_query_object(ds, query.q_id),
        query.r,
        query.metric,
        sample_ids,
        pilot_ids,
        oracle,
        proxy,
        ledger,
        delta=cfg.alpha,
    )
    sensitivity = query.sensitivity
    if sensitivity == "value":
        outcome = sprint_v(ctx, cfg.omega_v)
    elif sensitivity == "count":
        outcome = sprint_c(ctx, cfg.omega_c, cfg.max_iters)
    else:
        outcome = two_phase(ctx, cfg.omega_c, cfg.omega_v, cfg.max_iters)
    return SelectionResult(
        neighbors=outcome.neighbors,
        sample_ids=sample_ids,
        pilot_ids=pilot_ids,
        t_star=outcome.t_star,
        iterations=outcome.iterations,
        probes=outcome.probes,
        ledger=ledger,
    )
