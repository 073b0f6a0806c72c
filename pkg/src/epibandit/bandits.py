"""Fixed-budget best-arm identification over a censored-reward environment.

Every arm pull is one stochastic model evaluation and consumes one unit of
budget. Outcomes from epidemics that did not establish are logged but never
update arm statistics. Rewards are negated outcomes, so the best arm has the
lowest expected outcome.

Algorithms: uniform sampling, Successive Rejects, BayesGap with t-posterior
confidence bounds, and Top-two Thompson sampling (TTTS).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Protocol, Sequence

import numpy as np

from .errors import (
    BudgetTooSmall,
    CensoredOutcome,
    DegeneratePosterior,
    NoEstablishedSample,
    ResampleLimit,
    ZeroHardness,
)
from .stats import (
    ArmStatistics,
    TPosterior,
    posterior_from_stats,
    sample_posteriors,
    update_statistics,
)

__all__ = [
    "ALGORITHMS",
    "Environment",
    "RawOutcome",
    "PullRecord",
    "BudgetedRun",
    "Recommendation",
    "BayesGapConfig",
    "reward_of",
    "censored_pull",
    "run_uniform",
    "successive_rejects_schedule",
    "run_successive_rejects",
    "bayesgap_bounds",
    "estimate_hardness",
    "exploration_coefficient",
    "run_bayesgap",
    "run_ttts",
    "run_algorithm",
]

ALGORITHMS = ("uniform", "successive_rejects", "bayesgap", "ttts")
TTTS_RESAMPLE_CAP = 10_000
_TTTS_BLOCK = 32
_TTTS_MAX_BLOCK = 4096
_HARDNESS_WIDTH = 3.0


class RawOutcome(NamedTuple):
    outcome: float
    established: bool


class Environment(Protocol):
    """A K-armed bandit whose pulls run one stochastic evaluation each."""

    @property
    def arm_count(self) -> int: ...

    def pull(self, arm: int, rng: np.random.Generator) -> RawOutcome: ...


class PullRecord(NamedTuple):
    arm: int
    outcome: float
    established: bool
    accepted: bool


@dataclass
class BudgetedRun:
    """Mutable bookkeeping for one algorithm execution."""

    budget: int
    per_arm: list[ArmStatistics]
    pulls_used: int = 0
    pull_log: list[PullRecord] = field(default_factory=list)

    @classmethod
    def start(cls, arm_count: int, budget: int) -> "BudgetedRun":
        return cls(budget=budget, per_arm=[ArmStatistics() for _ in range(arm_count)])

    @property
    def remaining(self) -> int:
        return self.budget - self.pulls_used

    @property
    def exhausted(self) -> bool:
        return self.pulls_used >= self.budget

    def pull(self, env: Environment, arm: int, rng: np.random.Generator) -> RawOutcome:
        if self.exhausted:
            raise RuntimeError("budget exhausted")
        stats, raw = censored_pull(env, arm, self.per_arm[arm], rng)
        self.per_arm[arm] = stats
        self.pulls_used += 1
        self.pull_log.append(PullRecord(arm, raw.outcome, raw.established, raw.established))
        return raw

    def counts(self) -> list[int]:
        return [s.count for s in self.per_arm]

    def pull_counts(self) -> list[int]:
        counts = [0] * len(self.per_arm)
        for rec in self.pull_log:
            counts[rec.arm] += 1
        return counts

    def means(self) -> np.ndarray:
        """Empirical mean rewards; ``-inf`` for arms without accepted rewards."""
        return np.array([s.mean if s.count else -np.inf for s in self.per_arm])

    def best_empirical_arm(self) -> int:
        means = self.means()
        if not np.isfinite(means).any():
            raise NoEstablishedSample(
                f"no established outcome in {self.pulls_used} pulls")
        return int(np.argmax(means))  # first maximum: lowest index wins ties

    def posteriors(self) -> list[TPosterior]:
        return [posterior_from_stats(s) for s in self.per_arm]


@dataclass
class Recommendation:
    arm: int
    algorithm: str
    run: BudgetedRun
    probability_of_success: float | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class BayesGapConfig:
    epsilon: float = 0.001
    init_pulls: int = 3
    beta_recompute: bool = True

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        if self.init_pulls < 3:
            raise ValueError("BayesGap needs at least 3 initialization pulls for a finite std")


def reward_of(outcome: RawOutcome) -> float:
    if not outcome.established:
        raise CensoredOutcome("non-established outcomes carry no reward")
    return -outcome.outcome


def censored_pull(env: Environment, arm: int, stats: ArmStatistics,
                  rng: np.random.Generator) -> tuple[ArmStatistics, RawOutcome]:
    if not 0 <= arm < env.arm_count:
        raise IndexError(f"arm {arm} outside [0, {env.arm_count})")
    raw = env.pull(arm, rng)
    if raw.established:
        stats = update_statistics(stats, reward_of(raw))
    return stats, raw


def _initialize(env: Environment, run: BudgetedRun, n_init: int, rng: np.random.Generator) -> None:
    """Round-robin pulls until every arm has a proper posterior from ``n_init``
    accepted rewards; censored pulls are retried while budget remains."""

    def ready(s: ArmStatistics) -> bool:
        return s.count >= n_init and s.sum_sq > 0

    while True:
        pending = [k for k, s in enumerate(run.per_arm) if not ready(s)]
        if not pending:
            return
        for k in pending:
            if run.exhausted:
                raise NoEstablishedSample(
                    f"initialization incomplete after {run.pulls_used} pulls: "
                    f"{len(pending)} arm(s) lack {n_init} distinct accepted rewards")
            run.pull(env, k, rng)


def run_uniform(env: Environment, budget: int, rng: np.random.Generator) -> Recommendation:
    if budget < 1:
        raise BudgetTooSmall(f"budget must be positive, got {budget}")
    run = BudgetedRun.start(env.arm_count, budget)
    while not run.exhausted:
        run.pull(env, int(rng.integers(env.arm_count)), rng)
    return Recommendation(run.best_empirical_arm(), "uniform", run)


def log_bar(arm_count: int) -> float:
    return 0.5 + sum(1.0 / i for i in range(2, arm_count + 1))


def successive_rejects_schedule(budget: int, arm_count: int) -> list[int]:
    """Cumulative per-arm pull targets ``n_1 <= ... <= n_{K-1}``."""
    lb = log_bar(arm_count)
    return [math.ceil((budget - arm_count) / (lb * (arm_count + 1 - k)))
            for k in range(1, arm_count)]


def run_successive_rejects(env: Environment, budget: int, rng: np.random.Generator) -> Recommendation:
    K = env.arm_count
    if budget < K:
        raise BudgetTooSmall(f"Successive Rejects needs budget >= K = {K}, got {budget}")
    run = BudgetedRun.start(K, budget)
    if K == 1:
        while not run.exhausted:
            run.pull(env, 0, rng)
        return Recommendation(run.best_empirical_arm(), "successive_rejects", run)

    schedule = successive_rejects_schedule(budget, K)
    surviving = list(range(K))
    rejected = []
    previous = 0
    for phase, target in enumerate(schedule):
        for k in surviving:
            for _ in range(target - previous):
                if run.exhausted:
                    break
                run.pull(env, k, rng)
        previous = target
        if phase == len(schedule) - 1:
            # rounding slack goes to the final pair, alternating from the lower index
            for i in range(run.remaining):
                run.pull(env, surviving[i % 2], rng)
        means = run.means()
        # lowest mean is rejected; among ties the highest index goes
        worst = min(surviving, key=lambda k: (means[k], -k))
        surviving.remove(worst)
        rejected.append(worst)
    arm = surviving[0]
    if run.per_arm[arm].count == 0:
        raise NoEstablishedSample(f"no established outcome in {run.pulls_used} pulls")
    return Recommendation(arm, "successive_rejects", run,
                          diagnostics={"schedule": schedule, "rejected": rejected})


def bayesgap_bounds(post: TPosterior, beta: float) -> tuple[float, float]:
    width = beta * post.std
    return post.mean + width, post.mean - width


def _posterior_std(stats: ArmStatistics) -> float:
    """Std of the t posterior implied by ``stats`` (requires count > 2)."""
    n = stats.count
    return math.sqrt(stats.sum_sq) / n * math.sqrt(n / (n - 2.0))


def _bounds_arrays(posteriors: Sequence[TPosterior]) -> tuple[np.ndarray, np.ndarray]:
    mean = np.array([p.mean for p in posteriors])
    std = np.array([p.std for p in posteriors])
    return mean, std


def _max_excluding_self(values: np.ndarray) -> np.ndarray:
    """``out[k] = max_{l != k} values[l]`` in O(K)."""
    order = np.argsort(values)[::-1]
    top, second = values[order[0]], values[order[1]]
    out = np.full_like(values, top)
    out[order[0]] = second
    return out


def _hardness(mean: np.ndarray, std: np.ndarray, epsilon: float) -> float:
    upper = mean + _HARDNESS_WIDTH * std
    lower = mean - _HARDNESS_WIDTH * std
    gaps = _max_excluding_self(upper) - lower
    per_arm = np.maximum(0.5 * (gaps + epsilon), epsilon)
    if np.any(per_arm <= 0):
        raise ZeroHardness("arm hardness is zero; use a positive epsilon")
    return float(np.sum(per_arm ** -2.0))


def estimate_hardness(posteriors: Sequence[TPosterior], epsilon: float) -> float:
    if len(posteriors) < 2:
        raise ValueError("hardness needs at least two arms")
    if epsilon < 0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    return _hardness(*_bounds_arrays(posteriors), epsilon)


def exploration_coefficient(budget: int, arm_count: int, hardness: float, sigma_g_sq: float) -> float:
    if budget <= 3 * arm_count:
        raise BudgetTooSmall(f"BayesGap needs budget > 3K = {3 * arm_count}, got {budget}")
    return math.sqrt((budget - 3 * arm_count) / (4.0 * hardness * sigma_g_sq))


def run_bayesgap(env: Environment, budget: int, config: BayesGapConfig | None,
                 rng: np.random.Generator) -> Recommendation:
    config = config or BayesGapConfig()
    K = env.arm_count
    if K < 2:
        raise ValueError("BayesGap needs at least two arms")
    if budget <= 3 * K:
        raise BudgetTooSmall(f"BayesGap needs budget > 3K = {3 * K}, got {budget}")
    run = BudgetedRun.start(K, budget)
    _initialize(env, run, config.init_pulls, rng)
    sigma_g_sq = float(np.mean([s.variance for s in run.per_arm]))

    mean = np.array([s.mean for s in run.per_arm])
    std = np.array([_posterior_std(s) for s in run.per_arm])
    beta = None
    trace = []

    def step():
        nonlocal beta
        if beta is None or config.beta_recompute:
            hardness = _hardness(mean, std, config.epsilon)
            beta = exploration_coefficient(budget, K, hardness, sigma_g_sq)
        upper, lower = mean + beta * std, mean - beta * std
        gaps = _max_excluding_self(upper) - lower
        J = int(np.argmin(gaps))
        masked = upper.copy()
        masked[J] = -np.inf
        j = int(np.argmax(masked))
        diam = upper - lower
        if diam[J] > diam[j] or (diam[J] == diam[j] and J < j):
            chosen = J
        else:
            chosen = j
        trace.append((run.pulls_used, J, j, float(gaps[J]), float(beta), gaps))
        return chosen

    while not run.exhausted:
        arm = step()
        if run.pull(env, arm, rng).established:
            mean[arm] = run.per_arm[arm].mean
            std[arm] = _posterior_std(run.per_arm[arm])
    if not trace:
        step()

    best_step = min(range(len(trace)), key=lambda i: trace[i][3])
    arm = trace[best_step][1]
    return Recommendation(arm, "bayesgap", run, diagnostics={
        "sigma_g_sq": sigma_g_sq,
        "best_step": best_step,
        "trace": [t[:5] for t in trace],
        "gaps": [t[5] for t in trace],
    })


def run_ttts(env: Environment, budget: int, omega: float, rng: np.random.Generator,
             resample_cap: int = TTTS_RESAMPLE_CAP, strict: bool = False) -> Recommendation:
    """Top-two Thompson sampling.

    With probability ``1 - omega`` the pulled arm is a challenger: the leader
    of a fresh joint posterior draw that differs from the current leader.
    After ``resample_cap`` redraws without one, ``strict`` raises
    :class:`ResampleLimit`; otherwise the best non-leader arm of one more
    draw is used.
    """
    K = env.arm_count
    if not 0.0 < omega <= 1.0:
        raise ValueError(f"omega must lie in (0, 1], got {omega}")
    if budget <= 2 * K:
        raise BudgetTooSmall(f"TTTS needs budget > 2K = {2 * K}, got {budget}")
    run = BudgetedRun.start(K, budget)
    _initialize(env, run, 2, rng)

    df = np.array([float(s.count) for s in run.per_arm])
    loc = np.array([s.mean for s in run.per_arm])
    scale = np.array([math.sqrt(s.sum_sq) / s.count for s in run.per_arm])
    redraws = fallbacks = 0
    while not run.exhausted:
        top = int(np.argmax(sample_posteriors(df, loc, scale, rng)))
        arm = top
        if K > 1 and rng.random() >= omega:
            arm = -1
            drawn = 0
            block = _TTTS_BLOCK
            while arm < 0:
                if drawn >= resample_cap:
                    if strict:
                        raise ResampleLimit(f"no challenger to arm {top} in {resample_cap} redraws")
                    # leader is near-certain: best other arm of one more joint draw
                    draw = sample_posteriors(df, loc, scale, rng)
                    draw[top] = -np.inf
                    arm = int(np.argmax(draw))
                    fallbacks += 1
                    break
                size = min(block, resample_cap - drawn)
                leaders = np.argmax(sample_posteriors(df, loc, scale, rng, size=size), axis=1)
                hits = np.flatnonzero(leaders != top)
                if hits.size:
                    arm = int(leaders[hits[0]])
                    drawn += int(hits[0]) + 1
                else:
                    drawn += size
                    block = min(2 * block, _TTTS_MAX_BLOCK)
            redraws += drawn
        raw = run.pull(env, arm, rng)
        if raw.established:
            s = run.per_arm[arm]
            df[arm], loc[arm] = s.count, s.mean
            scale[arm] = math.sqrt(s.sum_sq) / s.count
    return Recommendation(run.best_empirical_arm(), "ttts", run,
                          diagnostics={"challenger_redraws": redraws,
                                       "challenger_fallbacks": fallbacks})


def run_algorithm(name: str, env: Environment, budget: int, rng: np.random.Generator, *,
                  omega: float = 0.5, epsilon: float = 0.001) -> Recommendation:
    if name == "uniform":
        return run_uniform(env, budget, rng)
    if name in ("successive_rejects", "sr"):
        return run_successive_rejects(env, budget, rng)
    if name == "bayesgap":
        return run_bayesgap(env, budget, BayesGapConfig(epsilon=epsilon), rng)
    if name == "ttts":
        return run_ttts(env, budget, omega, rng)
    raise ValueError(f"unknown algorithm {name!r}; choose from {ALGORITHMS}")
