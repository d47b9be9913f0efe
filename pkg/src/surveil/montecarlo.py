"""Monte Carlo estimation of the eavesdropping non-outage probability.

Channel draws depend only on the seed, the shard layout, the antenna counts
and the channel variances.  Every scheme and every jamming budget therefore
sees the same realizations for a given seed (common random numbers), and a
scheme using a sub-array sees the leading antennas of the full draw.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .beamform import SchemeId, batch_designs, scheme_array
from .model import ChannelBatch, SystemParams, make_rng, sample_channel_batch

__all__ = [
    "TrialPlan",
    "SchemeResult",
    "DominanceReport",
    "run_trials",
    "run_schemes",
    "scheme_dominance_report",
    "shard_batches",
    "default_shards",
    "draw_batch",
]

SHARD_ENV = "SURVEIL_SHARDS"
CHUNK = 20_000


def default_shards() -> int:
    """Shard count from the ``SURVEIL_SHARDS`` environment variable (default 1)."""
    raw = os.environ.get(SHARD_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{SHARD_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"{SHARD_ENV} must be a positive integer, got {raw!r}")
    return n


@dataclass(frozen=True)
class TrialPlan:
    params: SystemParams
    scheme: SchemeId
    trials: int = 100_000
    seed: int = 0
    shards: int = 1
    workers: int = 1  # processes; results do not depend on it

    def __post_init__(self):
        if self.trials < 1000:
            raise ValueError("use at least 1000 trials")
        if self.shards < 1 or self.trials % self.shards:
            raise ValueError("trials must be divisible by a positive shard count")
        if self.workers < 1:
            raise ValueError("workers must be positive")


@dataclass(frozen=True)
class SchemeResult:
    estimate: float
    std_error: float
    trials: int
    scheme: SchemeId
    successes: int = 0

    @classmethod
    def from_counts(cls, successes: int, trials: int, scheme: SchemeId) -> "SchemeResult":
        est = successes / trials
        return cls(est, math.sqrt(est * (1.0 - est) / trials), trials, scheme, successes)


def shard_batches(params: SystemParams, trials: int, seed: int, shards: int, shard: int):
    """Yield the channel chunks of one shard; each shard has its own Philox stream."""
    per = trials // shards
    rng = make_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, shard]))
    done = 0
    while done < per:
        n = min(CHUNK, per - done)
        yield sample_channel_batch(params, n, rng)
        done += n


def _count_shard(args) -> dict:
    params, schemes, trials, seed, shards, shard = args
    counts = {s: 0 for s in schemes}
    for batch in shard_batches(params, trials, seed, shards, shard):
        for s in schemes:
            design = batch_designs(s, params, batch, decide_only=True)
            counts[s] += int(np.count_nonzero(design.success(params)))
    return counts


def run_schemes(
    params: SystemParams,
    schemes,
    trials: int = 100_000,
    seed: int = 0,
    shards: int | None = None,
    workers: int = 1,
) -> dict[SchemeId, SchemeResult]:
    """Estimate several schemes on one set of channel draws."""
    schemes = list(schemes)
    shards = default_shards() if shards is None else shards
    for s in schemes:
        scheme_array(s, params)  # raises SchemeInapplicable early
        TrialPlan(params, s, trials, seed, shards, workers)
    jobs = [(params, schemes, trials, seed, shards, k) for k in range(shards)]
    if workers > 1 and shards > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_count_shard, jobs))
    else:
        parts = [_count_shard(j) for j in jobs]
    return {s: SchemeResult.from_counts(sum(p[s] for p in parts), trials, s) for s in schemes}


def run_trials(plan: TrialPlan) -> SchemeResult:
    """Fraction of fresh channel draws on which ``plan.scheme``'s design succeeds."""
    return run_schemes(plan.params, [plan.scheme], plan.trials, plan.seed, plan.shards, plan.workers)[plan.scheme]


@dataclass(frozen=True)
class DominanceReport:
    """Schemes evaluated on common draws, ordered by estimate (best first)."""

    results: list
    objectives: dict = field(repr=False)  # scheme -> per-realization objective, success iff <= 0

    def objective_dominance(self, better: SchemeId, worse: SchemeId, tol: float = 1e-6) -> float:
        """Fraction of realizations where ``better``'s objective is at most ``worse``'s plus ``tol``."""
        a, b = self.objectives[better], self.objectives[worse]
        return float(np.mean(a <= b + tol))


def scheme_dominance_report(
    params: SystemParams, schemes, trials: int = 1000, seed: int = 0
) -> DominanceReport:
    """Evaluate ``schemes`` on identical draws, keeping per-realization objectives.

    Unlike :func:`run_trials` the MIMO design here is always the complete
    two-stage search, so its objective is comparable realization by
    realization.  Meant for modest trial counts.
    """
    schemes = list(schemes)
    if len(schemes) < 2:
        raise ValueError("need at least two schemes to compare")
    objectives = {s: [] for s in schemes}
    successes = {s: 0 for s in schemes}
    for batch in shard_batches(params, trials, seed, 1, 0):
        for s in schemes:
            d = batch_designs(s, params, batch)
            objectives[s].append(d.objective(params))
            successes[s] += int(np.count_nonzero(d.success(params)))
    objectives = {s: np.concatenate(v) for s, v in objectives.items()}
    results = sorted(
        (SchemeResult.from_counts(successes[s], trials, s) for s in schemes),
        key=lambda r: -r.estimate,
    )
    return DominanceReport(results, objectives)


def draw_batch(params: SystemParams, trials: int, seed: int) -> ChannelBatch:
    """All draws of a single-shard plan in one batch (for tests and small studies)."""
    parts = list(shard_batches(params, trials, seed, 1, 0))
    return ChannelBatch(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("h_sd", "h_se", "h_ed", "h_ee")))
