"""Efficiency-threshold admission rules built on the exponential curve Psi.

With user efficiencies known to lie in [L, U], define on z in [0, 1]

    Psi(z) = (U e / L)^z * (L / e)          (e = Euler's number)

Psi(0) = L/e, Psi(1) = U.  A policy that admits a user exactly when its
efficiency is at least Psi(z), with z the fraction of the energy budget
already committed, is (ln(U/L) + 1)-competitive against the offline optimum
in the static-budget setting.  Two fraction conventions are implemented:

* monotone: z = used / total budget over the whole horizon (needs foresight
  of the total; z never decreases);
* jumping: z = used / energy arrived so far (no foresight; z drops at every
  arrival, so the threshold jumps back down).

Ties admit: efficiency equal to the threshold is served.
"""

from __future__ import annotations

import math

from .errors import ParameterError
from .instances import EfficiencyBounds, EpisodeInstance, UserDemand
from .policies import AdmissionPolicy, PolicyState


def psi(z: float, bounds: EfficiencyBounds) -> float:
    """Threshold curve value at fill fraction z (clamped to [0, 1])."""
    z = min(max(float(z), 0.0), 1.0)
    base = bounds.upper * math.e / bounds.lower
    return base ** z * (bounds.lower / math.e)


def competitive_bound(bounds: EfficiencyBounds) -> float:
    """Worst-case OPT/ALG guarantee for Psi-threshold admission."""
    return math.log(bounds.upper / bounds.lower) + 1.0


def monotone_decide(
    state: PolicyState,
    demand: UserDemand,
    used_energy: float,
    total_energy: float,
    bounds: EfficiencyBounds,
) -> bool:
    """Serve iff feasible and efficiency >= Psi(used / total budget)."""
    if total_energy <= 0.0:
        raise ParameterError(f"total energy budget must be positive, got {total_energy}")
    z = used_energy / total_energy
    return (
        demand.weight <= state.available_energy
        and demand.efficiency >= psi(z, bounds)
    )


def jumping_decide(
    state: PolicyState,
    demand: UserDemand,
    used_energy: float,
    arrived_energy: float,
    bounds: EfficiencyBounds,
) -> bool:
    """Serve iff feasible and efficiency >= Psi(used / arrived so far)."""
    if arrived_energy <= 0.0:
        return False
    z = used_energy / arrived_energy
    return (
        demand.weight <= state.available_energy
        and demand.efficiency >= psi(z, bounds)
    )


class MonotoneThresholdPolicy(AdmissionPolicy):
    """Psi threshold on the fraction of the whole-horizon budget used.

    Peeks at the schedule total during reset, so it assumes the operator
    knows how much energy the day will bring (but not when).
    """

    name = "monotone"

    def __init__(self, bounds: EfficiencyBounds):
        self.bounds = bounds
        self._total = 0.0
        self._used = 0.0

    def reset(self, instance: EpisodeInstance) -> None:
        total = instance.schedule.total()
        if total <= 0.0:
            raise ParameterError("monotone threshold needs a positive total energy budget")
        self._total = total
        self._used = 0.0

    def decide(self, state: PolicyState, demand: UserDemand) -> bool:
        self.last_threshold = psi(self._used / self._total, self.bounds)
        return (
            demand.weight <= state.available_energy
            and demand.efficiency >= self.last_threshold
        )

    def record(self, state: PolicyState, demand: UserDemand, served: bool) -> None:
        if served:
            self._used += demand.weight


class JumpingThresholdPolicy(AdmissionPolicy):
    """Psi threshold on the fraction of energy arrived so far.

    Needs no foresight: the denominator is everything credited up to the
    current slot (available battery plus what this policy has spent).
    """

    name = "jumping"

    def __init__(self, bounds: EfficiencyBounds):
        self.bounds = bounds
        self._used = 0.0

    def reset(self, instance: EpisodeInstance) -> None:
        self._used = 0.0

    def decide(self, state: PolicyState, demand: UserDemand) -> bool:
        arrived = state.available_energy + self._used
        if arrived <= 0.0:
            self.last_threshold = None
            return False
        self.last_threshold = psi(self._used / arrived, self.bounds)
        return (
            demand.weight <= state.available_energy
            and demand.efficiency >= self.last_threshold
        )

    def record(self, state: PolicyState, demand: UserDemand, served: bool) -> None:
        if served:
            self._used += demand.weight
