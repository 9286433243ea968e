"""Monte Carlo evaluation: deterministic campaigns and stochastic comparisons.

Deterministic campaigns draw instances from the generator, score each policy
against the offline optimum, and aggregate OPT/ALG ratios (the mean of the
per-trial ratios, not a ratio of means).  Common random numbers are used
throughout: trial t always sees the instance derived from (seed, t), so
results are byte-identical no matter how many worker processes run the
trials.

Stochastic comparisons simulate the type/harvest model under every policy on
the same sampled scenario matrices, and report means with standard errors
next to the DP value and (for two types) the closed-form upper bound.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dp import DpConfig, ThresholdTable, ValueTable, build_value_table, extract_thresholds
from .errors import ParameterError
from .fuzzy import FuzzySystem, FuzzyThresholdPolicy, default_fuzzy_system
from .ga import BucketThresholdPolicy
from .instances import (
    EfficiencyBounds,
    EnergyArrivalSchedule,
    EpisodeInstance,
    RandomSource,
    StochasticEnergyModel,
    UserType,
    as_type_tuple,
    generate_deterministic_instance,
    type_arrays,
)
from .offline import offline_value
from .policies import (
    AdmissionPolicy,
    ConservativePolicy,
    GreedyPolicy,
    expected_threshold,
    run_policy_trace,
)
from .thresholds import JumpingThresholdPolicy, MonotoneThresholdPolicy

CSV_FIELDS = ("trial", "policy", "alg_value", "opt_value", "ratio")


# ---------------------------------------------------------------------------
# Deterministic campaigns
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolicySpec:
    """A policy by name plus whatever payload it needs to be built."""

    name: str
    thresholds: tuple[float, ...] | None = None  # ga
    best_efficiency: float | None = None  # conservative

    def __post_init__(self) -> None:
        if self.thresholds is not None:
            object.__setattr__(self, "thresholds", tuple(float(t) for t in self.thresholds))


def build_policy(
    spec: PolicySpec,
    bounds: EfficiencyBounds,
    fuzzy_system: FuzzySystem | None = None,
) -> AdmissionPolicy:
    if spec.name == "greedy":
        return GreedyPolicy()
    if spec.name == "conservative":
        if spec.best_efficiency is None:
            raise ParameterError("conservative policy needs best_efficiency")
        return ConservativePolicy(spec.best_efficiency)
    if spec.name == "monotone":
        return MonotoneThresholdPolicy(bounds)
    if spec.name == "jumping":
        return JumpingThresholdPolicy(bounds)
    if spec.name == "ga":
        if spec.thresholds is None:
            raise ParameterError("ga policy needs a trained chromosome")
        return BucketThresholdPolicy(np.array(spec.thresholds))
    if spec.name == "fuzzy":
        return FuzzyThresholdPolicy(bounds, fuzzy_system)
    raise ParameterError(f"unknown deterministic policy {spec.name!r}")


@dataclass(frozen=True)
class CampaignConfig:
    """One deterministic Monte Carlo experiment, fully specified."""

    n_trials: int
    n_users: int
    bounds: EfficiencyBounds
    weight_range: tuple[float, float]
    schedule: EnergyArrivalSchedule
    policies: tuple[PolicySpec, ...]
    seed: int
    weight_step: float | None = None
    offline_scale: int = 1

    def __post_init__(self) -> None:
        if self.n_trials < 1:
            raise ParameterError(f"n_trials must be >= 1, got {self.n_trials}")
        object.__setattr__(self, "policies", tuple(self.policies))
        if not self.policies:
            raise ParameterError("at least one policy is required")
        names = [p.name for p in self.policies]
        if len(set(names)) != len(names):
            raise ParameterError(f"duplicate policy names in {names}")
        object.__setattr__(
            self, "weight_range",
            (float(self.weight_range[0]), float(self.weight_range[1])),
        )


@dataclass(frozen=True)
class TrialRow:
    trial: int
    policy: str
    alg_value: float
    opt_value: float
    ratio: float


@dataclass(frozen=True)
class PolicyStats:
    policy: str
    mean_value: float
    worst_value: float
    best_value: float
    mean_ratio: float
    worst_ratio: float
    best_ratio: float


@dataclass
class CampaignReport:
    config: CampaignConfig
    rows: list[TrialRow]
    invalid_trials: int
    opt_mean: float
    opt_min: float
    opt_max: float
    stats: dict[str, PolicyStats] = field(default_factory=dict)

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_FIELDS)
            for row in self.rows:
                writer.writerow([
                    row.trial, row.policy,
                    repr(row.alg_value), repr(row.opt_value), repr(row.ratio),
                ])

    def summary_dict(self) -> dict:
        return {
            "n_trials": self.config.n_trials,
            "invalid_trials": self.invalid_trials,
            "seed": self.config.seed,
            "offline": {
                "mean_value": self.opt_mean,
                "worst_value": self.opt_min,
                "best_value": self.opt_max,
            },
            "policies": {
                name: {
                    "mean_value": s.mean_value,
                    "worst_value": s.worst_value,
                    "best_value": s.best_value,
                    "mean_ratio": s.mean_ratio,
                    "worst_ratio": s.worst_ratio,
                    "best_ratio": s.best_ratio,
                }
                for name, s in self.stats.items()
            },
        }


def _ratio(opt: float, alg: float) -> float:
    if opt <= 0.0:
        return 1.0
    if alg <= 0.0:
        return math.inf
    return opt / alg


def run_trial(config: CampaignConfig, trial: int) -> list[TrialRow] | None:
    """All policy rows for one trial, or None if any policy failed on it."""
    rng = RandomSource(config.seed).generator(trial)
    instance = generate_deterministic_instance(
        config.n_users, config.bounds, config.weight_range,
        config.schedule, rng, config.weight_step,
    )
    opt = offline_value(instance, config.offline_scale)
    rows = []
    try:
        for spec in config.policies:
            policy = build_policy(spec, config.bounds)
            alg = run_policy_trace(instance, policy).total_value
            rows.append(TrialRow(trial, spec.name, alg, opt, _ratio(opt, alg)))
    except ParameterError:
        raise
    except Exception:
        return None
    return rows


def _trial_star(args) -> list[TrialRow] | None:
    return run_trial(*args)


def run_campaign(config: CampaignConfig, threads: int = 1) -> CampaignReport:
    """Run every trial, in processes when threads > 1.

    Rows come back ordered by (trial, policy position) regardless of the
    worker count, so reports are reproducible byte for byte.
    """
    if threads < 1:
        raise ParameterError(f"threads must be >= 1, got {threads}")
    jobs = [(config, t) for t in range(config.n_trials)]
    if threads == 1:
        results = [run_trial(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_trial_star, jobs, chunksize=max(1, config.n_trials // (8 * threads))))

    rows: list[TrialRow] = []
    invalid = 0
    for res in results:
        if res is None:
            invalid += 1
        else:
            rows.extend(res)

    by_policy: dict[str, list[TrialRow]] = {p.name: [] for p in config.policies}
    for row in rows:
        by_policy[row.policy].append(row)
    stats = {}
    for spec in config.policies:
        got = by_policy[spec.name]
        if not got:
            continue
        values = np.array([r.alg_value for r in got])
        ratios = np.array([r.ratio for r in got])
        stats[spec.name] = PolicyStats(
            policy=spec.name,
            mean_value=float(values.mean()),
            worst_value=float(values.min()),
            best_value=float(values.max()),
            mean_ratio=float(ratios.mean()),
            worst_ratio=float(ratios.max()),
            best_ratio=float(ratios.min()),
        )
    opts = np.array([r.opt_value for r in rows if r.policy == config.policies[0].name])
    return CampaignReport(
        config=config,
        rows=rows,
        invalid_trials=invalid,
        opt_mean=float(opts.mean()) if opts.size else math.nan,
        opt_min=float(opts.min()) if opts.size else math.nan,
        opt_max=float(opts.max()) if opts.size else math.nan,
        stats=stats,
    )


# ---------------------------------------------------------------------------
# Two-type upper bound
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class UpperBoundResult:
    bound: float
    regime: str  # "harvest-limited" or "arrival-limited"


def two_type_upper_bound(types: Sequence[UserType], q: float, n_slots: int) -> UpperBoundResult:
    """Closed-form cap on expected total value for two types, no initial battery.

    With the better type (v1, w1, p1): when q/w1 <= p1 the harvest is the
    binding resource and the bound is v1 q N / w1 (all energy spent at the
    best efficiency).  Otherwise best-type arrivals bind: fill with the
    worse type and upgrade the expected N p1 best-type arrivals,

        v2 q N / w2 + (v1 - v2 w1 / w2) N p1.
    """
    types = as_type_tuple(types)
    if len(types) != 2:
        raise ParameterError(f"the closed-form bound needs exactly 2 types, got {len(types)}")
    if not 0.0 <= q <= 1.0:
        raise ParameterError(f"harvest probability must lie in [0, 1], got {q}")
    if n_slots < 1:
        raise ParameterError(f"n_slots must be >= 1, got {n_slots}")
    worse, better = types
    v1, w1, p1 = better.value, better.weight, better.probability
    v2, w2 = worse.value, worse.weight
    if q / w1 <= p1:
        return UpperBoundResult(v1 * q * n_slots / w1, "harvest-limited")
    bound = v2 * q * n_slots / w2 + (v1 - v2 * w1 / w2) * n_slots * p1
    return UpperBoundResult(bound, "arrival-limited")


# ---------------------------------------------------------------------------
# Stochastic comparisons
# ---------------------------------------------------------------------------

STOCHASTIC_POLICY_NAMES = ("greedy", "conservative", "expected-threshold", "dp")


def sample_scenario_batch(
    types: Sequence[UserType],
    q: float,
    n_slots: int,
    n_episodes: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """(type index, harvest) matrices of shape (episodes, slots)."""
    _, _, probs = type_arrays(types)
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    kinds = np.searchsorted(cum, rng.random((n_episodes, n_slots)), side="right")
    kinds = np.minimum(kinds, len(types) - 1).astype(np.int64)
    harvest = rng.random((n_episodes, n_slots)) < q
    return kinds, harvest


def threshold_matrix(
    name: str,
    config: DpConfig,
    thresholds: ThresholdTable | None = None,
    include_current_slot: bool = True,
) -> np.ndarray:
    """Per-(slot, type) serve thresholds for one stochastic policy.

    Every stochastic policy here reduces to "serve iff battery >= matrix
    entry"; +inf encodes never-serve.  Row 0 is unused.
    """
    N, K = config.n_slots, config.n_types
    _, weights, _ = type_arrays(config.types)
    effs = np.array([t.efficiency for t in config.types])
    out = np.full((N + 1, K), np.inf)
    if name == "greedy":
        out[1:] = weights
    elif name == "conservative":
        best = effs >= effs.max() - 1e-9
        out[1:] = np.where(best, weights, np.inf)
    elif name == "expected-threshold":
        for n in range(1, N + 1):
            for k in range(K):
                eta = expected_threshold(
                    n, N, k, config.types, config.energy.harvest_probability,
                    include_current_slot,
                )
                out[n, k] = max(weights[k], eta)
    elif name == "dp":
        if thresholds is None:
            raise ParameterError("dp policy needs an extracted threshold table")
        out[1:] = thresholds.eta[1:].astype(float)
    else:
        raise ParameterError(f"unknown stochastic policy {name!r}")
    return out


def run_threshold_batch(
    matrix: np.ndarray,
    types: Sequence[UserType],
    kinds: np.ndarray,
    harvest: np.ndarray,
    initial_energy: float,
    energy_cap: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate a threshold matrix over a scenario batch.

    Returns (per-episode totals, per-slot running mean of collected value).
    Harvests land after the decision of their slot; the battery clips at
    ``energy_cap``.
    """
    values, weights, _ = type_arrays(types)
    n_episodes, n_slots = kinds.shape
    e = np.full(n_episodes, float(min(initial_energy, energy_cap)))
    totals = np.zeros(n_episodes)
    trajectory = np.empty(n_slots)
    for n in range(1, n_slots + 1):
        k = kinds[:, n - 1]
        thr = matrix[n, k]
        w = weights[k]
        serve = (e >= thr) & (e >= w)
        totals += np.where(serve, values[k], 0.0)
        e -= np.where(serve, w, 0.0)
        e += harvest[:, n - 1]
        np.minimum(e, energy_cap, out=e)
        trajectory[n - 1] = totals.mean()
    return totals, trajectory


@dataclass(frozen=True)
class PolicySummary:
    policy: str
    mean: float
    std: float
    stderr: float
    trajectory: tuple[float, ...]


@dataclass
class StochasticReport:
    n_episodes: int
    seed: int
    dp_expected_value: float
    policies: dict[str, PolicySummary]
    bound: UpperBoundResult | None = None
    bound_with_battery: float | None = None
    bound_holds: dict[str, bool] | None = None

    def summary_dict(self) -> dict:
        doc = {
            "n_episodes": self.n_episodes,
            "seed": self.seed,
            "dp_expected_value": self.dp_expected_value,
            "policies": {
                name: {"mean": s.mean, "std": s.std, "stderr": s.stderr}
                for name, s in self.policies.items()
            },
        }
        if self.bound is not None:
            doc["upper_bound"] = {
                "value": self.bound.bound,
                "regime": self.bound.regime,
                "with_initial_battery": self.bound_with_battery,
            }
            doc["bound_holds"] = dict(self.bound_holds or {})
        return doc


def stochastic_comparison(
    types: Sequence[UserType],
    q: float,
    n_slots: int,
    initial_energy: int,
    energy_cap: int,
    n_episodes: int,
    seed: int,
    policy_names: Sequence[str] = STOCHASTIC_POLICY_NAMES,
    include_current_slot: bool = True,
) -> StochasticReport:
    """Simulate the named policies on common scenarios; attach DP and bound."""
    types = as_type_tuple(types)
    if n_episodes < 1:
        raise ParameterError(f"n_episodes must be >= 1, got {n_episodes}")
    config = DpConfig(n_slots, types, StochasticEnergyModel(q), energy_cap)
    table: ValueTable = build_value_table(config)
    dp_thresholds = extract_thresholds(table)
    kinds, harvest = sample_scenario_batch(
        types, q, n_slots, n_episodes, RandomSource(seed).generator()
    )
    summaries: dict[str, PolicySummary] = {}
    for name in policy_names:
        matrix = threshold_matrix(name, config, dp_thresholds, include_current_slot)
        totals, trajectory = run_threshold_batch(
            matrix, types, kinds, harvest, initial_energy, energy_cap
        )
        std = float(totals.std(ddof=1)) if n_episodes > 1 else 0.0
        summaries[name] = PolicySummary(
            policy=name,
            mean=float(totals.mean()),
            std=std,
            stderr=std / math.sqrt(n_episodes),
            trajectory=tuple(float(x) for x in trajectory),
        )
    bound = None
    bound_with_battery = None
    bound_holds = None
    if len(types) == 2:
        bound = two_type_upper_bound(types, q, n_slots)
        # the closed form budgets only the harvested energy; the starting
        # battery adds at most its best-efficiency conversion on top
        best_rate = max(t.efficiency for t in types)
        bound_with_battery = bound.bound + float(initial_energy) * best_rate
        bound_holds = {
            name: s.mean - 3.0 * s.stderr <= bound_with_battery
            for name, s in summaries.items()
        }
    return StochasticReport(
        n_episodes=n_episodes,
        seed=seed,
        dp_expected_value=table.expected_value(initial_energy),
        policies=summaries,
        bound=bound,
        bound_with_battery=bound_with_battery,
        bound_holds=bound_holds,
    )
