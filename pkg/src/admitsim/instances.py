"""Domain model for admission episodes at an energy-harvesting service point.

An episode is a finite horizon of slots, one user demand per slot, plus a
schedule of energy arrivals.  Demands are value/weight pairs; the ratio
value/weight is the demand's efficiency.  Deterministic instances fix every
demand and arrival up front; the stochastic model draws demands from a small
set of user types and harvests unit energy packets as an IID Bernoulli
process.

Serialization uses a flat JSON document::

    {"horizon": N,
     "users": [{"value": v, "weight": w}, ...],
     "schedule": [{"slot": s, "amount": a}, ...]}

Slot indices are 1-based for decisions; schedule slot 0 holds the energy
available before the first decision.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ParameterError


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class UserDemand:
    """A single admission request: reward ``value`` for ``weight`` energy."""

    value: float
    weight: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", _require_finite("value", self.value))
        object.__setattr__(self, "weight", _require_finite("weight", self.weight))
        if self.value <= 0.0:
            raise ParameterError(f"value must be positive, got {self.value}")
        if self.weight <= 0.0:
            raise ParameterError(f"weight must be positive, got {self.weight}")

    @property
    def efficiency(self) -> float:
        return self.value / self.weight


@dataclass(frozen=True)
class UserType:
    """A demand class in the stochastic model, with its arrival probability."""

    value: float
    weight: float
    probability: float

    def __post_init__(self) -> None:
        UserDemand(self.value, self.weight)  # reuse the demand validation
        p = _require_finite("probability", self.probability)
        if not 0.0 <= p <= 1.0:
            raise ParameterError(f"probability must lie in [0, 1], got {p}")
        object.__setattr__(self, "probability", p)

    @property
    def demand(self) -> UserDemand:
        return UserDemand(self.value, self.weight)

    @property
    def efficiency(self) -> float:
        return self.value / self.weight


def as_type_tuple(types: Iterable[UserType]) -> tuple[UserType, ...]:
    """Validate a collection of user types and freeze it as a tuple.

    Types must be ordered by nondecreasing efficiency (the last type is the
    most efficient) and the arrival probabilities must sum to one.
    """
    out = tuple(types)
    if not out:
        raise ParameterError("at least one user type is required")
    for t in out:
        if not isinstance(t, UserType):
            raise ParameterError(f"expected UserType, got {type(t).__name__}")
    effs = [t.efficiency for t in out]
    if any(b < a - 1e-12 for a, b in zip(effs, effs[1:])):
        raise ParameterError(
            "user types must be ordered by nondecreasing efficiency"
        )
    total_p = sum(t.probability for t in out)
    if abs(total_p - 1.0) > 1e-9:
        raise ParameterError(
            f"type probabilities must sum to 1, got {total_p!r}"
        )
    return out


def type_arrays(types: Sequence[UserType]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (values, weights, probabilities) as float arrays."""
    values = np.array([t.value for t in types], dtype=float)
    weights = np.array([t.weight for t in types], dtype=float)
    probs = np.array([t.probability for t in types], dtype=float)
    return values, weights, probs


def match_type_indices(users: Sequence[UserDemand], types: Sequence[UserType]) -> np.ndarray:
    """Map each demand back to the index of the type it was drawn from.

    Matching is exact on (value, weight); sampled demands copy the type's
    floats so this is well defined for episodes produced by
    :func:`sample_stochastic_episode`.
    """
    lookup = {(t.value, t.weight): k for k, t in enumerate(types)}
    out = np.empty(len(users), dtype=np.int64)
    for i, u in enumerate(users):
        try:
            out[i] = lookup[(u.value, u.weight)]
        except KeyError:
            raise ParameterError(
                f"user {i} with value={u.value} weight={u.weight} "
                "matches no known type"
            ) from None
    return out


@dataclass(frozen=True)
class EfficiencyBounds:
    """Known lower/upper bounds L <= value/weight <= U on user efficiency."""

    lower: float
    upper: float

    def __post_init__(self) -> None:
        lo = _require_finite("lower", self.lower)
        hi = _require_finite("upper", self.upper)
        if lo <= 0.0:
            raise ParameterError(f"lower efficiency bound must be positive, got {lo}")
        if hi < lo:
            raise ParameterError(f"need lower <= upper, got [{lo}, {hi}]")

    @property
    def span(self) -> float:
        return self.upper - self.lower


@dataclass(frozen=True)
class EnergyArrivalSchedule:
    """Known energy arrivals: (slot, amount) pairs with strictly increasing slots.

    Slot 0 carries the initial battery; an arrival at slot n >= 1 is energy
    harvested during slot n.  Whether that energy may already be spent at
    slot n depends on the consumer: the offline solver counts arrivals up to
    and including the current slot, the stochastic simulator credits the
    slot-n harvest after the slot-n decision.
    """

    entries: tuple[tuple[int, float], ...]

    def __post_init__(self) -> None:
        norm = []
        prev = -1
        for raw in self.entries:
            try:
                slot, amount = raw
            except (TypeError, ValueError):
                raise ParameterError(f"schedule entry {raw!r} is not a (slot, amount) pair") from None
            slot = int(slot)
            amount = _require_finite("arrival amount", amount)
            if slot < 0:
                raise ParameterError(f"arrival slot must be >= 0, got {slot}")
            if slot <= prev:
                raise ParameterError("arrival slots must be strictly increasing")
            if amount < 0.0:
                raise ParameterError(f"arrival amount must be >= 0, got {amount}")
            prev = slot
            norm.append((slot, amount))
        object.__setattr__(self, "entries", tuple(norm))

    @property
    def initial_energy(self) -> float:
        """Amount available before the first decision (slot-0 entry, or 0)."""
        if self.entries and self.entries[0][0] == 0:
            return self.entries[0][1]
        return 0.0

    @property
    def last_slot(self) -> int:
        return self.entries[-1][0] if self.entries else 0

    def total(self) -> float:
        return float(sum(a for _, a in self.entries))

    def cumulative_through(self, slot: int) -> float:
        """Total energy arrived at slots <= ``slot``."""
        return float(sum(a for s, a in self.entries if s <= slot))

    def cumulative_caps(self, horizon: int) -> np.ndarray:
        """Vector of cumulative arrivals through each slot 1..horizon."""
        caps = np.zeros(horizon, dtype=float)
        if horizon == 0:
            return caps
        for s, a in self.entries:
            caps[max(s, 1) - 1:] += a
        return caps

    def next_slot_after(self, slot: int) -> int | None:
        """Smallest arrival slot strictly greater than ``slot``, if any."""
        for s, _ in self.entries:
            if s > slot:
                return s
        return None


@dataclass(frozen=True)
class StochasticEnergyModel:
    """Unit energy packets harvested IID Bernoulli(q) once per slot."""

    harvest_probability: float

    def __post_init__(self) -> None:
        q = _require_finite("harvest_probability", self.harvest_probability)
        if not 0.0 <= q <= 1.0:
            raise ParameterError(f"harvest probability must lie in [0, 1], got {q}")


@dataclass(frozen=True)
class RandomSource:
    """Seed material for reproducible, independently keyed random streams."""

    seed: int

    def generator(self, *keys: int) -> np.random.Generator:
        """A fresh generator for this seed, optionally keyed by extra indices.

        ``generator(i)`` for distinct ``i`` gives statistically independent
        streams, which is how per-trial common random numbers are derived.
        """
        if keys:
            return np.random.default_rng([self.seed, *keys])
        return np.random.default_rng(self.seed)


@dataclass(frozen=True)
class EpisodeInstance:
    """One fully specified episode: a demand per slot plus the arrival schedule."""

    horizon: int
    users: tuple[UserDemand, ...]
    schedule: EnergyArrivalSchedule

    def __post_init__(self) -> None:
        if int(self.horizon) != self.horizon or self.horizon < 0:
            raise ParameterError(f"horizon must be a nonnegative integer, got {self.horizon!r}")
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "users", tuple(self.users))
        if len(self.users) != self.horizon:
            raise ParameterError(
                f"expected {self.horizon} users, got {len(self.users)}"
            )
        for u in self.users:
            if not isinstance(u, UserDemand):
                raise ParameterError(f"expected UserDemand, got {type(u).__name__}")
        if self.schedule.entries and self.schedule.last_slot > self.horizon:
            raise ParameterError(
                f"arrival slot {self.schedule.last_slot} exceeds horizon {self.horizon}"
            )

    def value_array(self) -> np.ndarray:
        return np.array([u.value for u in self.users], dtype=float)

    def weight_array(self) -> np.ndarray:
        return np.array([u.weight for u in self.users], dtype=float)

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "users": [{"value": u.value, "weight": u.weight} for u in self.users],
            "schedule": [{"slot": s, "amount": a} for s, a in self.schedule.entries],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "EpisodeInstance":
        if not isinstance(doc, dict):
            raise ParameterError("instance document must be a JSON object")
        extra = set(doc) - {"horizon", "users", "schedule"}
        if extra:
            raise ParameterError(f"unknown instance keys: {sorted(extra)}")
        try:
            horizon = doc["horizon"]
            users_doc = doc["users"]
            sched_doc = doc["schedule"]
        except KeyError as missing:
            raise ParameterError(f"instance document missing key {missing}") from None
        if not isinstance(users_doc, list) or not isinstance(sched_doc, list):
            raise ParameterError("'users' and 'schedule' must be lists")
        users = []
        for i, entry in enumerate(users_doc):
            if not isinstance(entry, dict) or set(entry) != {"value", "weight"}:
                raise ParameterError(f"user entry {i} must have exactly value/weight keys")
            users.append(UserDemand(entry["value"], entry["weight"]))
        arrivals = []
        for i, entry in enumerate(sched_doc):
            if not isinstance(entry, dict) or set(entry) != {"slot", "amount"}:
                raise ParameterError(f"schedule entry {i} must have exactly slot/amount keys")
            arrivals.append((entry["slot"], entry["amount"]))
        return cls(horizon, tuple(users), EnergyArrivalSchedule(tuple(arrivals)))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "EpisodeInstance":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParameterError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(doc)


def generate_deterministic_instance(
    n_users: int,
    bounds: EfficiencyBounds,
    weight_range: tuple[float, float],
    schedule: EnergyArrivalSchedule,
    rng: np.random.Generator,
    weight_step: float | None = None,
) -> EpisodeInstance:
    """Draw a deterministic episode with uniform weights and efficiencies.

    Weights are uniform on ``weight_range`` (snapped to the ``weight_step``
    grid when given, so exact integer scaling is available downstream);
    efficiencies are uniform on [bounds.lower, bounds.upper]; each value is
    efficiency * weight.  The schedule is attached unchanged.
    """
    if n_users < 0:
        raise ParameterError(f"n_users must be >= 0, got {n_users}")
    w_lo, w_hi = float(weight_range[0]), float(weight_range[1])
    if not (0.0 < w_lo <= w_hi):
        raise ParameterError(f"need 0 < w_lo <= w_hi, got ({w_lo}, {w_hi})")
    if weight_step is not None and weight_step <= 0.0:
        raise ParameterError(f"weight_step must be positive, got {weight_step}")
    weights = rng.uniform(w_lo, w_hi, size=n_users)
    if weight_step is not None:
        weights = np.round(weights / weight_step) * weight_step
        weights = np.clip(weights, max(w_lo, weight_step), w_hi)
    effs = rng.uniform(bounds.lower, bounds.upper, size=n_users)
    users = tuple(UserDemand(e * w, w) for e, w in zip(effs, weights))
    return EpisodeInstance(n_users, users, schedule)


def sample_stochastic_episode(
    types: Sequence[UserType],
    energy: StochasticEnergyModel,
    n_slots: int,
    initial_energy: float,
    rng: np.random.Generator,
) -> EpisodeInstance:
    """Sample one episode of the stochastic model as a concrete instance.

    One type is drawn per slot according to the arrival probabilities, and
    the Bernoulli harvest drawn for slot n is recorded at schedule slot n.
    The initial battery goes in at slot 0 when positive.
    """
    types = as_type_tuple(types)
    if n_slots < 0:
        raise ParameterError(f"n_slots must be >= 0, got {n_slots}")
    initial_energy = _require_finite("initial_energy", initial_energy)
    if initial_energy < 0.0:
        raise ParameterError(f"initial energy must be >= 0, got {initial_energy}")
    _, _, probs = type_arrays(types)
    kinds = rng.choice(len(types), size=n_slots, p=probs / probs.sum())
    harvests = rng.random(n_slots) < energy.harvest_probability
    users = tuple(types[k].demand for k in kinds)
    arrivals: list[tuple[int, float]] = []
    if initial_energy > 0.0:
        arrivals.append((0, initial_energy))
    arrivals.extend((n + 1, 1.0) for n in range(n_slots) if harvests[n])
    return EpisodeInstance(n_slots, users, EnergyArrivalSchedule(tuple(arrivals)))
