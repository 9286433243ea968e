"""Mamdani fuzzy controller that sets the admission threshold per slot.

Two inputs on [0, 1]:

* closeness of the next energy arrival (1 = imminent, 0 = far away or no
  arrival coming), measured as elapsed progress through the current
  inter-arrival interval;
* fullness, the fraction of the energy budget of the current interval that
  has already been consumed.

Both are fuzzified over five trapezoidal levels, combined through a 25-rule
table (min activation, max aggregation), and defuzzified by centroid to a
normalized threshold t in [0, 1], which callers map affinely onto the
efficiency band [L, U].  Intuition of the rule table: the further away the
next recharge and the more of the budget is gone, the pickier the policy.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ParameterError
from .instances import EfficiencyBounds, EpisodeInstance, UserDemand
from .policies import AdmissionPolicy, PolicyState

CLOSENESS_LEVELS = ("very-far", "far", "medium", "near", "very-near")
FULLNESS_LEVELS = ("very-low", "low", "medium", "high", "very-high")
OUTPUT_LEVELS = ("very-low", "low", "medium", "high", "very-high")


@dataclass(frozen=True)
class TrapezoidMf:
    """Trapezoidal membership function with knees a <= b <= c <= d.

    Membership rises on [a, b], holds 1 on [b, c], falls on [c, d].  Knees
    may lie outside [0, 1]; only the restriction to [0, 1] is ever used.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self) -> None:
        if not (self.a <= self.b <= self.c <= self.d):
            raise ParameterError(
                f"trapezoid knees must satisfy a <= b <= c <= d, got "
                f"({self.a}, {self.b}, {self.c}, {self.d})"
            )

    def membership(self, x):
        x = np.asarray(x, dtype=float)
        if self.b > self.a:
            rising = np.clip((x - self.a) / (self.b - self.a), 0.0, 1.0)
        else:
            rising = (x >= self.a).astype(float)
        if self.d > self.c:
            falling = np.clip((self.d - x) / (self.d - self.c), 0.0, 1.0)
        else:
            falling = (x <= self.d).astype(float)
        out = np.minimum(rising, falling)
        return float(out) if out.ndim == 0 else out


def _level_bank(labels: Iterable[str]) -> dict[str, TrapezoidMf]:
    """Five symmetric trapezoids centered at 0, .25, .5, .75, 1.

    Plateau half-width 1/16 and foot half-width 3/16, so adjacent levels
    cross at membership 0.5 and memberships sum to 1 everywhere on [0, 1].
    """
    bank = {}
    for i, label in enumerate(labels):
        center = i / 4.0
        bank[label] = TrapezoidMf(
            center - 0.1875, center - 0.0625, center + 0.0625, center + 0.1875
        )
    return bank


#: (closeness level, fullness level) -> output level.
DEFAULT_RULES: dict[tuple[str, str], str] = {
    ("very-near", "very-low"): "very-low",
    ("very-near", "low"): "very-low",
    ("very-near", "medium"): "low",
    ("very-near", "high"): "low",
    ("very-near", "very-high"): "medium",
    ("near", "very-low"): "very-low",
    ("near", "low"): "very-low",
    ("near", "medium"): "low",
    ("near", "high"): "medium",
    ("near", "very-high"): "high",
    ("medium", "very-low"): "very-low",
    ("medium", "low"): "low",
    ("medium", "medium"): "medium",
    ("medium", "high"): "medium",
    ("medium", "very-high"): "high",
    ("far", "very-low"): "low",
    ("far", "low"): "low",
    ("far", "medium"): "high",
    ("far", "high"): "high",
    ("far", "very-high"): "very-high",
    ("very-far", "very-low"): "low",
    ("very-far", "low"): "medium",
    ("very-far", "medium"): "high",
    ("very-far", "high"): "very-high",
    ("very-far", "very-high"): "very-high",
}


@dataclass(frozen=True)
class FuzzySystem:
    """A complete Mamdani system: three variable banks plus the rule table."""

    closeness: Mapping[str, TrapezoidMf]
    fullness: Mapping[str, TrapezoidMf]
    output: Mapping[str, TrapezoidMf]
    rules: Mapping[tuple[str, str], str]
    grid_points: int = 1001

    def __post_init__(self) -> None:
        object.__setattr__(self, "closeness", dict(self.closeness))
        object.__setattr__(self, "fullness", dict(self.fullness))
        object.__setattr__(self, "output", dict(self.output))
        object.__setattr__(self, "rules", dict(self.rules))
        if self.grid_points < 11:
            raise ParameterError("grid_points must be at least 11")
        want = {(c, f) for c in self.closeness for f in self.fullness}
        have = set(self.rules)
        if have != want:
            raise ParameterError(
                f"rule table must cover every input pair exactly once; "
                f"missing {sorted(want - have)[:3]}, extra {sorted(have - want)[:3]}"
            )
        unknown = {o for o in self.rules.values() if o not in self.output}
        if unknown:
            raise ParameterError(f"rules reference unknown output levels {sorted(unknown)}")
        unit = np.linspace(0.0, 1.0, self.grid_points)
        for name, bank in (("closeness", self.closeness), ("fullness", self.fullness),
                           ("output", self.output)):
            cover = np.max([mf.membership(unit) for mf in bank.values()], axis=0)
            if np.any(cover <= 0.0):
                hole = float(unit[int(np.argmax(cover <= 0.0))])
                raise ParameterError(f"{name} levels leave x={hole} with zero membership")
        # Defuzzify over the full support of the output bank, not just
        # [0, 1]: truncating the edge trapezoids would skew their centroids
        # as the clip height varies, breaking row monotonicity.
        lo = min(0.0, min(mf.a for mf in self.output.values()))
        hi = max(1.0, max(mf.d for mf in self.output.values()))
        # Anchor the grid on the trapezoid corners and give every segment
        # the same point count.  Mirror-image segments then sample
        # identically, so a clipped symmetric level keeps its centroid on
        # its center at every clip height and same-label stretches of the
        # response surface stay flat instead of wobbling with the grid.
        corners = {lo, hi}
        for mf in self.output.values():
            corners.update(x for x in (mf.a, mf.b, mf.c, mf.d) if lo <= x <= hi)
        knots = np.array(sorted(corners))
        per = max(1, -((1 - self.grid_points) // (knots.size - 1)))
        parts = [
            np.linspace(knots[i], knots[i + 1], per + 1)[:-1]
            for i in range(knots.size - 1)
        ]
        grid = np.concatenate(parts + [knots[-1:]])
        object.__setattr__(self, "_grid", grid)
        object.__setattr__(
            self,
            "_output_grid",
            {label: mf.membership(grid) for label, mf in self.output.items()},
        )

    def rule_activations(self, closeness: float, fullness: float) -> dict[tuple[str, str], float]:
        """Min-activation strength of every rule at the (clamped) inputs."""
        c = min(max(float(closeness), 0.0), 1.0)
        f = min(max(float(fullness), 0.0), 1.0)
        mu_c = {lbl: mf.membership(c) for lbl, mf in self.closeness.items()}
        mu_f = {lbl: mf.membership(f) for lbl, mf in self.fullness.items()}
        return {key: min(mu_c[key[0]], mu_f[key[1]]) for key in self.rules}

    def output_centroid(self, label: str) -> float:
        """Centroid of a single output level over [0, 1]."""
        mu = self._output_grid[label]
        return float(np.trapezoid(mu * self._grid, self._grid) / np.trapezoid(mu, self._grid))

    def to_dict(self) -> dict:
        def bank_doc(bank: Mapping[str, TrapezoidMf]) -> list[dict]:
            return [
                {"label": lbl, "a": mf.a, "b": mf.b, "c": mf.c, "d": mf.d}
                for lbl, mf in bank.items()
            ]

        return {
            "inputs": {
                "closeness": bank_doc(self.closeness),
                "fullness": bank_doc(self.fullness),
            },
            "output": bank_doc(self.output),
            "rules": [[c, f, o] for (c, f), o in self.rules.items()],
        }


def default_fuzzy_system() -> FuzzySystem:
    return FuzzySystem(
        closeness=_level_bank(CLOSENESS_LEVELS),
        fullness=_level_bank(FULLNESS_LEVELS),
        output=_level_bank(OUTPUT_LEVELS),
        rules=DEFAULT_RULES,
    )


def _bank_from_doc(doc, what: str) -> dict[str, TrapezoidMf]:
    if not isinstance(doc, list) or not doc:
        raise ParameterError(f"{what} must be a nonempty list of membership functions")
    bank = {}
    for entry in doc:
        if not isinstance(entry, dict) or set(entry) != {"label", "a", "b", "c", "d"}:
            raise ParameterError(
                f"each {what} entry needs exactly label/a/b/c/d, got {entry!r}"
            )
        if entry["label"] in bank:
            raise ParameterError(f"duplicate {what} label {entry['label']!r}")
        bank[entry["label"]] = TrapezoidMf(entry["a"], entry["b"], entry["c"], entry["d"])
    return bank


def fuzzy_system_from_dict(doc: dict) -> FuzzySystem:
    if not isinstance(doc, dict):
        raise ParameterError("fuzzy system document must be a JSON object")
    extra = set(doc) - {"inputs", "output", "rules"}
    if extra:
        raise ParameterError(f"unknown fuzzy system keys: {sorted(extra)}")
    try:
        inputs = doc["inputs"]
        output_doc = doc["output"]
        rules_doc = doc["rules"]
    except KeyError as missing:
        raise ParameterError(f"fuzzy system document missing key {missing}") from None
    if not isinstance(inputs, dict) or set(inputs) != {"closeness", "fullness"}:
        raise ParameterError("'inputs' must hold exactly closeness and fullness banks")
    rules = {}
    if not isinstance(rules_doc, list):
        raise ParameterError("'rules' must be a list of [closeness, fullness, output] triples")
    for triple in rules_doc:
        if not (isinstance(triple, list) and len(triple) == 3):
            raise ParameterError(f"rule {triple!r} is not a three-element list")
        c, f, o = triple
        if (c, f) in rules:
            raise ParameterError(f"duplicate rule for ({c!r}, {f!r})")
        rules[(c, f)] = o
    return FuzzySystem(
        closeness=_bank_from_doc(inputs["closeness"], "closeness"),
        fullness=_bank_from_doc(inputs["fullness"], "fullness"),
        output=_bank_from_doc(output_doc, "output"),
        rules=rules,
    )


def load_fuzzy_system(path) -> FuzzySystem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: not valid JSON ({exc})") from None
    return fuzzy_system_from_dict(doc)


def infer_threshold(closeness: float, fullness: float, system: FuzzySystem) -> float:
    """Normalized threshold in [0, 1]: min-max Mamdani inference + centroid."""
    activations = system.rule_activations(closeness, fullness)
    strength: dict[str, float] = {}
    for (c, f), out in system.rules.items():
        a = activations[(c, f)]
        if a > strength.get(out, 0.0):
            strength[out] = a
    grid = system._grid
    agg = np.zeros_like(grid)
    for label, a in strength.items():
        if a > 0.0:
            np.maximum(agg, np.minimum(a, system._output_grid[label]), out=agg)
    den = np.trapezoid(agg, grid)
    if den <= 1e-12:
        return 0.5
    return float(np.trapezoid(agg * grid, grid) / den)


@dataclass(frozen=True)
class HarvestWindow:
    """Where the current slot sits between two scheduled energy arrivals."""

    interval_start: int
    next_arrival: int | None
    budget_at_start: float
    consumed: float

    def closeness(self, slot: int) -> float:
        if self.next_arrival is None:
            return 0.0
        length = self.next_arrival - self.interval_start
        if length <= 0:
            return 1.0
        return min(max((slot - self.interval_start) / length, 0.0), 1.0)

    def fullness(self) -> float:
        if self.budget_at_start <= 0.0:
            return 1.0
        return min(max(self.consumed / self.budget_at_start, 0.0), 1.0)


def fuzzy_decide(
    state: PolicyState,
    demand: UserDemand,
    window: HarvestWindow,
    system: FuzzySystem,
    bounds: EfficiencyBounds,
) -> bool:
    """Serve iff feasible and efficiency clears the inferred threshold.

    The normalized threshold is mapped onto [L, U]; ties admit.
    """
    t = infer_threshold(window.closeness(state.slot), window.fullness(), system)
    threshold = bounds.lower + bounds.span * t
    return (
        demand.weight <= state.available_energy
        and demand.efficiency >= threshold
    )


class FuzzyThresholdPolicy(AdmissionPolicy):
    """Deterministic-episode policy around the fuzzy controller."""

    name = "fuzzy"

    def __init__(self, bounds: EfficiencyBounds, system: FuzzySystem | None = None):
        self.bounds = bounds
        self.system = system if system is not None else default_fuzzy_system()
        self._entries: tuple[tuple[int, float], ...] = ()
        self._next = 0
        self._window = HarvestWindow(0, None, 0.0, 0.0)

    def reset(self, instance: EpisodeInstance) -> None:
        self._entries = instance.schedule.entries
        self._next = 0
        self._window = HarvestWindow(0, self._peek_next(0), 0.0, 0.0)

    def _peek_next(self, after: int) -> int | None:
        for slot, _ in self._entries[self._next:]:
            if slot > after:
                return slot
        return None

    def decide(self, state: PolicyState, demand: UserDemand) -> bool:
        # Fold any arrivals credited at or before this slot into a fresh
        # window whose budget is the battery as it stood after crediting.
        started = False
        while self._next < len(self._entries) and self._entries[self._next][0] <= state.slot:
            start = self._entries[self._next][0]
            self._next += 1
            started = True
        if started:
            self._window = HarvestWindow(
                interval_start=start,
                next_arrival=self._peek_next(start),
                budget_at_start=state.available_energy,
                consumed=0.0,
            )
        t = infer_threshold(
            self._window.closeness(state.slot), self._window.fullness(), self.system
        )
        self.last_threshold = self.bounds.lower + self.bounds.span * t
        return (
            demand.weight <= state.available_energy
            and demand.efficiency >= self.last_threshold
        )

    def record(self, state: PolicyState, demand: UserDemand, served: bool) -> None:
        if served:
            self._window = HarvestWindow(
                self._window.interval_start,
                self._window.next_arrival,
                self._window.budget_at_start,
                self._window.consumed + demand.weight,
            )
