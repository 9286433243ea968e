"""Genetic search over bucketed threshold curves.

A chromosome is a lookup table of 1000 efficiency thresholds indexed by the
fill fraction z = used / arrived-so-far (the jumping convention: no budget
foresight).  Fitness of a chromosome is the mean OPT/ALG ratio over a fixed
training pool of instances, minimized by a plain generational GA with
tournament selection, uniform crossover, Gaussian mutation and elitism.

The per-episode policy evaluation is the hot loop (population x pool x
slots); it is compiled with numba when available and falls back to pure
Python otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .instances import EfficiencyBounds, EpisodeInstance
from .offline import solve_offline
from .policies import AdmissionPolicy, PolicyState, UserDemand
from .thresholds import psi

N_BUCKETS = 1000

#: Ratio charged when a chromosome serves nothing on an instance with
#: positive optimum; keeps fitness finite while burying such chromosomes.
SENTINEL_RATIO = 1e6


def _episode_total(thresholds, values, weights, effs, a_slots, a_amts):
    """Total value collected by a bucket-threshold policy on one episode."""
    e = 0.0
    used = 0.0
    arrived = 0.0
    total = 0.0
    j = 0
    n_arrivals = a_slots.shape[0]
    for i in range(values.shape[0]):
        while j < n_arrivals and a_slots[j] <= i + 1:
            e += a_amts[j]
            arrived += a_amts[j]
            j += 1
        w = weights[i]
        if w <= e:
            b = int(used / arrived * N_BUCKETS)
            if b >= N_BUCKETS:
                b = N_BUCKETS - 1
            if effs[i] >= thresholds[b]:
                total += values[i]
                e -= w
                used += w
    return total


try:  # pragma: no cover - exercised implicitly wherever numba is installed
    from numba import njit

    _episode_total_jit = njit(cache=True)(_episode_total)
except ImportError:  # pragma: no cover
    _episode_total_jit = _episode_total


@dataclass(frozen=True)
class Chromosome:
    """1000 efficiency thresholds over the fill-fraction axis [0, 1)."""

    thresholds: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.thresholds, dtype=float)
        if arr.shape != (N_BUCKETS,):
            raise ParameterError(
                f"chromosome needs exactly {N_BUCKETS} thresholds, got shape {arr.shape}"
            )
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0):
            raise ParameterError("thresholds must be finite and nonnegative")
        object.__setattr__(self, "thresholds", arr)

    @staticmethod
    def bucket_index(z: float) -> int:
        return min(int(max(z, 0.0) * N_BUCKETS), N_BUCKETS - 1)


@dataclass(frozen=True)
class GaConfig:
    bounds: EfficiencyBounds
    training_pool: tuple[EpisodeInstance, ...]
    population_size: int = 50
    generations: int = 200
    crossover_rate: float = 0.9
    mutation_rate: float = 0.01
    mutation_scale: float = 0.5
    elitism_count: int = 2
    tournament_size: int = 3
    offline_scale: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "training_pool", tuple(self.training_pool))
        if not self.training_pool:
            raise ParameterError("training pool must not be empty")
        if self.population_size < max(2, self.elitism_count + 1):
            raise ParameterError("population too small for the elite count")
        for name in ("crossover_rate", "mutation_rate"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {r}")
        if self.mutation_scale < 0.0:
            raise ParameterError("mutation_scale must be >= 0")
        if self.tournament_size < 1:
            raise ParameterError("tournament_size must be >= 1")
        if self.generations < 0:
            raise ParameterError("generations must be >= 0")
        if self.elitism_count < 0:
            raise ParameterError("elitism_count must be >= 0")


@dataclass
class GaResult:
    best: Chromosome
    best_fitness: float
    history: list[float] = field(default_factory=list)
    ratios: np.ndarray | None = None


def _instance_arrays(instance: EpisodeInstance):
    values = instance.value_array()
    weights = instance.weight_array()
    effs = values / weights
    slots = np.array([s for s, _ in instance.schedule.entries], dtype=np.int64)
    amts = np.array([a for _, a in instance.schedule.entries], dtype=float)
    return values, weights, effs, slots, amts


def bucket_policy_value(thresholds: np.ndarray, instance: EpisodeInstance) -> float:
    """Value collected on one instance by the given threshold table."""
    arr = np.ascontiguousarray(thresholds, dtype=float)
    if arr.shape != (N_BUCKETS,):
        raise ParameterError(f"expected {N_BUCKETS} thresholds, got shape {arr.shape}")
    return float(_episode_total_jit(arr, *_instance_arrays(instance)))


def pool_ratios(
    thresholds: np.ndarray,
    pool_arrays: Sequence[tuple],
    opt_values: np.ndarray,
) -> np.ndarray:
    """Per-instance OPT/ALG ratios for one chromosome over a prepared pool."""
    arr = np.ascontiguousarray(thresholds, dtype=float)
    out = np.empty(len(pool_arrays))
    for i, arrays in enumerate(pool_arrays):
        alg = _episode_total_jit(arr, *arrays)
        opt = opt_values[i]
        if opt <= 0.0:
            out[i] = 1.0
        elif alg <= 0.0:
            out[i] = SENTINEL_RATIO
        else:
            out[i] = opt / alg
    return out


def evaluate_chromosome(
    chromosome: Chromosome,
    pool: Sequence[EpisodeInstance],
    offline_scale: int = 1,
    opt_values: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """(mean ratio, per-instance ratios) of a chromosome on a pool."""
    arrays = [_instance_arrays(inst) for inst in pool]
    if opt_values is None:
        opt_values = np.array(
            [solve_offline(inst, offline_scale).total_value for inst in pool]
        )
    ratios = pool_ratios(chromosome.thresholds, arrays, opt_values)
    return float(ratios.mean()), ratios


def psi_seed_chromosome(bounds: EfficiencyBounds) -> Chromosome:
    """The Psi curve sampled at bucket centers; one such individual seeds the GA."""
    centers = (np.arange(N_BUCKETS) + 0.5) / N_BUCKETS
    return Chromosome(np.array([psi(z, bounds) for z in centers]))


def evolve(config: GaConfig) -> GaResult:
    """Run the GA and return the best chromosome ever seen.

    Deterministic for a fixed config (all randomness flows from
    ``config.seed``); with elitism > 0 the per-generation best fitness in
    ``history`` never increases.
    """
    rng = np.random.default_rng(config.seed)
    pool = config.training_pool
    pool_arrays = [_instance_arrays(inst) for inst in pool]
    opt_values = np.array(
        [solve_offline(inst, config.offline_scale).total_value for inst in pool]
    )

    P, G = config.population_size, N_BUCKETS
    lo = config.bounds.lower / np.e
    hi = config.bounds.upper
    population = rng.uniform(lo, hi, size=(P, G))
    population[0] = psi_seed_chromosome(config.bounds).thresholds

    def fitness_of(pop: np.ndarray) -> np.ndarray:
        return np.array([
            pool_ratios(row, pool_arrays, opt_values).mean() for row in pop
        ])

    fitness = fitness_of(population)
    history = [float(fitness.min())]
    best_i = int(np.argmin(fitness))
    best_ever = population[best_i].copy()
    best_ever_fitness = float(fitness[best_i])

    def tournament() -> np.ndarray:
        picks = rng.integers(0, P, size=config.tournament_size)
        return population[picks[np.argmin(fitness[picks])]]

    for _ in range(config.generations):
        order = np.argsort(fitness, kind="stable")
        children = [population[i].copy() for i in order[: config.elitism_count]]
        while len(children) < P:
            p1, p2 = tournament(), tournament()
            if rng.random() < config.crossover_rate:
                mask = rng.random(G) < 0.5
                c1 = np.where(mask, p1, p2)
                c2 = np.where(mask, p2, p1)
            else:
                c1, c2 = p1.copy(), p2.copy()
            for child in (c1, c2):
                if len(children) >= P:
                    break
                mmask = rng.random(G) < config.mutation_rate
                n_mut = int(mmask.sum())
                if n_mut:
                    child = child.copy()
                    child[mmask] += rng.normal(0.0, config.mutation_scale, size=n_mut)
                    np.clip(child, 0.0, hi, out=child)
                children.append(child)
        population = np.array(children)
        fitness = fitness_of(population)
        history.append(float(fitness.min()))
        gen_best = int(np.argmin(fitness))
        if float(fitness[gen_best]) < best_ever_fitness:
            best_ever = population[gen_best].copy()
            best_ever_fitness = float(fitness[gen_best])

    best = Chromosome(best_ever)
    ratios = pool_ratios(best.thresholds, pool_arrays, opt_values)
    return GaResult(best, best_ever_fitness, history, ratios)


class BucketThresholdPolicy(AdmissionPolicy):
    """Deterministic-episode policy driven by a (trained) chromosome."""

    name = "ga"

    def __init__(self, thresholds: np.ndarray):
        self.chromosome = Chromosome(np.asarray(thresholds, dtype=float))
        self._used = 0.0
        self._arrived = 0.0
        self._entries: tuple[tuple[int, float], ...] = ()
        self._next = 0

    def reset(self, instance: EpisodeInstance) -> None:
        self._used = 0.0
        self._arrived = 0.0
        self._entries = instance.schedule.entries
        self._next = 0

    def decide(self, state: PolicyState, demand: UserDemand) -> bool:
        while self._next < len(self._entries) and self._entries[self._next][0] <= state.slot:
            self._arrived += self._entries[self._next][1]
            self._next += 1
        if self._arrived <= 0.0 or demand.weight > state.available_energy:
            self.last_threshold = None
            return False
        b = Chromosome.bucket_index(self._used / self._arrived)
        self.last_threshold = float(self.chromosome.thresholds[b])
        return demand.efficiency >= self.last_threshold

    def record(self, state: PolicyState, demand: UserDemand, served: bool) -> None:
        if served:
            self._used += demand.weight
