"""Online admission policies and the slot-by-slot simulators that drive them.

Two simulation conventions exist, matching the two problem settings:

* deterministic episodes (:func:`run_policy_trace`): the arrival scheduled
  at slot n is in the battery before the slot-n decision;
* stochastic episodes (:func:`run_stochastic_trace`): the slot-n harvest
  lands after the slot-n decision, and the battery is clipped at a cap.

Both enforce feasibility (a user is only served if its weight fits in the
battery) no matter what a policy answers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

from .dp import ThresholdTable
from .errors import ParameterError
from .instances import EpisodeInstance, UserDemand, UserType, match_type_indices

#: Names accepted by the CLI and the evaluation harness.
POLICY_NAMES = (
    "greedy",
    "conservative",
    "expected-threshold",
    "dp",
    "monotone",
    "jumping",
    "ga",
    "fuzzy",
)


@dataclass(frozen=True)
class PolicyState:
    """What an online policy may look at when deciding."""

    slot: int  # 1-based
    horizon: int
    available_energy: float


@dataclass(frozen=True)
class TraceStep:
    slot: int
    value: float
    weight: float
    energy_before: float
    served: bool
    threshold: float | None = None


@dataclass
class DecisionTrace:
    steps: list[TraceStep] = field(default_factory=list)

    @property
    def total_value(self) -> float:
        return sum(s.value for s in self.steps if s.served)

    @property
    def total_weight(self) -> float:
        return sum(s.weight for s in self.steps if s.served)

    @property
    def n_served(self) -> int:
        return sum(1 for s in self.steps if s.served)


def greedy_decide(state: PolicyState, demand: UserDemand) -> bool:
    """Serve whenever the battery allows."""
    return demand.weight <= state.available_energy


def conservative_decide(
    state: PolicyState,
    demand: UserDemand,
    best_efficiency: float,
    tol: float = 1e-9,
) -> bool:
    """Serve only demands of the best efficiency class, when feasible."""
    return (
        demand.weight <= state.available_energy
        and demand.efficiency >= best_efficiency - tol
    )


def expected_threshold(
    slot: int,
    horizon: int,
    type_index: int,
    types: Sequence[UserType],
    harvest_probability: float,
    include_current_slot: bool = True,
) -> float:
    """Closed-form serve threshold for the stochastic model.

    Balances the energy that better types are expected to claim over the
    remaining slots against the energy expected to be harvested:

        eta = slots_remaining * (sum_{k' > k} p(k') w(k') - q)

    With ``include_current_slot`` (the default) slots_remaining counts the
    current slot, N - n + 1; otherwise N - n, counting only the future.
    """
    if not 1 <= slot <= horizon:
        raise ParameterError(f"slot {slot} outside 1..{horizon}")
    if not 0 <= type_index < len(types):
        raise ParameterError(f"type index {type_index} out of range")
    remaining = horizon - slot + (1 if include_current_slot else 0)
    better = sum(
        t.probability * t.weight for t in list(types)[type_index + 1:]
    )
    return remaining * (better - harvest_probability)


def expected_threshold_decide(
    state: PolicyState,
    type_index: int,
    types: Sequence[UserType],
    harvest_probability: float,
    include_current_slot: bool = True,
) -> bool:
    demand = types[type_index]
    eta = expected_threshold(
        state.slot, state.horizon, type_index, types,
        harvest_probability, include_current_slot,
    )
    return (
        demand.weight <= state.available_energy
        and state.available_energy >= eta
    )


def dp_policy_decide(state: PolicyState, type_index: int, thresholds: ThresholdTable) -> bool:
    """Serve iff battery is at or above the table threshold for (slot, type)."""
    cfg = thresholds.config
    if state.slot > cfg.n_slots:
        raise ParameterError(
            f"slot {state.slot} beyond the table horizon {cfg.n_slots}"
        )
    if not 0 <= type_index < cfg.n_types:
        raise ParameterError(f"type index {type_index} out of range")
    return state.available_energy >= thresholds.eta[state.slot, type_index]


class AdmissionPolicy:
    """Base for stateful deterministic-episode policies.

    Subclasses override :meth:`decide`; ``reset`` is called once per episode
    and ``record`` after every decision so a policy can track consumption.
    ``last_threshold`` (when set) ends up in the trace.
    """

    name = "policy"
    last_threshold: float | None = None

    def reset(self, instance: EpisodeInstance) -> None:
        pass

    def decide(self, state: PolicyState, demand: UserDemand) -> bool:
        raise NotImplementedError

    def record(self, state: PolicyState, demand: UserDemand, served: bool) -> None:
        pass


class GreedyPolicy(AdmissionPolicy):
    name = "greedy"

    def decide(self, state: PolicyState, demand: UserDemand) -> bool:
        return greedy_decide(state, demand)


class ConservativePolicy(AdmissionPolicy):
    name = "conservative"

    def __init__(self, best_efficiency: float):
        if best_efficiency <= 0:
            raise ParameterError("best_efficiency must be positive")
        self.best_efficiency = float(best_efficiency)

    def decide(self, state: PolicyState, demand: UserDemand) -> bool:
        return conservative_decide(state, demand, self.best_efficiency)


def run_policy_trace(instance: EpisodeInstance, policy: AdmissionPolicy) -> DecisionTrace:
    """Run a deterministic-episode policy slot by slot.

    Arrivals at slot <= n are in the battery before the slot-n decision.
    """
    policy.reset(instance)
    trace = DecisionTrace()
    entries = list(instance.schedule.entries)
    e = 0.0
    j = 0
    for n in range(1, instance.horizon + 1):
        while j < len(entries) and entries[j][0] <= n:
            e += entries[j][1]
            j += 1
        demand = instance.users[n - 1]
        state = PolicyState(slot=n, horizon=instance.horizon, available_energy=e)
        policy.last_threshold = None
        served = policy.decide(state, demand) and demand.weight <= e
        if served:
            e -= demand.weight
        policy.record(state, demand, served)
        trace.steps.append(TraceStep(
            slot=n, value=demand.value, weight=demand.weight,
            energy_before=state.available_energy, served=served,
            threshold=policy.last_threshold,
        ))
    return trace


def run_stochastic_trace(
    instance: EpisodeInstance,
    types: Sequence[UserType],
    decide: Callable[[PolicyState, int, UserDemand], bool],
    energy_cap: float | None = None,
) -> DecisionTrace:
    """Run a stochastic-model policy over one sampled episode.

    ``decide(state, type_index, demand)`` answers serve/defer.  The harvest
    recorded at schedule slot n is credited after the slot-n decision; the
    slot-0 entry seeds the battery.  When ``energy_cap`` is given the
    battery is clipped to it after every credit.
    """
    kinds = match_type_indices(instance.users, types)
    trace = DecisionTrace()
    entries = list(instance.schedule.entries)
    e = instance.schedule.initial_energy
    if energy_cap is not None:
        e = min(e, energy_cap)
    j = 1 if (entries and entries[0][0] == 0) else 0
    for n in range(1, instance.horizon + 1):
        demand = instance.users[n - 1]
        state = PolicyState(slot=n, horizon=instance.horizon, available_energy=e)
        served = decide(state, int(kinds[n - 1]), demand) and demand.weight <= e
        if served:
            e -= demand.weight
        while j < len(entries) and entries[j][0] <= n:
            e += entries[j][1]
            j += 1
        if energy_cap is not None:
            e = min(e, energy_cap)
        trace.steps.append(TraceStep(
            slot=n, value=demand.value, weight=demand.weight,
            energy_before=state.available_energy, served=served,
        ))
    return trace
