"""Finite-horizon dynamic program for the stochastic admission model.

State is (slot n, battery e, current user type k).  The recursion runs
backward from an all-zero terminal row at slot N+1:

    V_n(e, k) = max( defer_n(e),  v(k) + defer-like continuation at e - w(k) )

where the continuation from post-decision energy e' first applies the unit
Bernoulli(q) harvest (clipped at the battery cap E) and then takes the
expectation over the next user type:

    C_n(e') = q * W_{n+1}(min(e'+1, E)) + (1-q) * W_{n+1}(e'),
    W_{n+1}(e) = sum_k p(k) * V_{n+1}(e, k).

Serving requires e >= w(k).  Weights must be integers so the battery lives
on {0..E}.  The module also extracts the per-(slot, type) serve thresholds
and offers structural checks (monotonicity, concavity, supermodularity,
threshold shape) as diagnostics that report rather than raise: some of them
are only guaranteed under extra conditions on the type distribution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ResourceError
from .instances import (
    StochasticEnergyModel,
    UserType,
    as_type_tuple,
    type_arrays,
)


@dataclass(frozen=True)
class DpConfig:
    """Everything the backward induction needs.

    ``energy_cap`` E bounds the battery state; harvested energy beyond it is
    lost.  Type weights must be integral (they index battery states).
    """

    n_slots: int
    types: tuple[UserType, ...]
    energy: StochasticEnergyModel
    energy_cap: int

    def __post_init__(self) -> None:
        if self.n_slots < 1:
            raise ParameterError(f"n_slots must be >= 1, got {self.n_slots}")
        object.__setattr__(self, "types", as_type_tuple(self.types))
        for t in self.types:
            if abs(t.weight - round(t.weight)) > 1e-9:
                raise ParameterError(
                    f"type weight {t.weight} is not an integer; the battery "
                    "state space is integral"
                )
        if int(self.energy_cap) != self.energy_cap or self.energy_cap < 1:
            raise ParameterError(f"energy_cap must be a positive integer, got {self.energy_cap}")
        object.__setattr__(self, "energy_cap", int(self.energy_cap))
        if self.energy_cap < max(int(round(t.weight)) for t in self.types):
            raise ParameterError("energy_cap is below the largest type weight; no type could ever be served")

    @property
    def n_types(self) -> int:
        return len(self.types)

    def weight_ints(self) -> np.ndarray:
        return np.array([int(round(t.weight)) for t in self.types], dtype=np.int64)


@dataclass(frozen=True)
class ValueTable:
    """Optimal expected values V[n, e, k] for n in 1..N+1 (row 0 unused)."""

    config: DpConfig
    values: np.ndarray  # shape (N+2, E+1, K)

    def value(self, n: int, e: int, k: int) -> float:
        return float(self.values[n, e, k])

    def expected_value(self, initial_energy: int) -> float:
        """E[V_1(e0, k)] over the first user type: the value of the episode."""
        e0 = _as_energy_state(initial_energy, self.config.energy_cap)
        _, _, probs = type_arrays(self.config.types)
        return float(self.values[1, e0, :] @ probs)


@dataclass(frozen=True)
class ThresholdTable:
    """Minimal serve energies eta[n, k]; energy_cap + 1 encodes "never serve"."""

    config: DpConfig
    eta: np.ndarray  # shape (N+1, K), int; row 0 unused

    @property
    def never(self) -> int:
        return self.config.energy_cap + 1

    def to_dict(self) -> dict:
        return {
            "n_slots": self.config.n_slots,
            "energy_cap": self.config.energy_cap,
            "harvest_probability": self.config.energy.harvest_probability,
            "types": [
                {"value": t.value, "weight": t.weight, "probability": t.probability}
                for t in self.config.types
            ],
            "eta": self.eta[1:].tolist(),
        }


@dataclass(frozen=True)
class PropertyReport:
    """Outcome of one structural check over a whole value table."""

    name: str
    passed: bool
    n_checked: int
    detail: str = ""

    def __str__(self) -> str:
        status = "ok" if self.passed else "VIOLATED"
        tail = f" ({self.detail})" if self.detail else ""
        return f"{self.name}: {status}, {self.n_checked} comparisons{tail}"


def _as_energy_state(e, cap: int) -> int:
    if abs(e - round(e)) > 1e-9:
        raise ParameterError(f"energy state must be integral, got {e}")
    e = int(round(e))
    if not 0 <= e <= cap:
        raise ParameterError(f"energy state {e} outside battery range 0..{cap}")
    return e


def _continuation(next_values: np.ndarray, probs: np.ndarray, q: float) -> np.ndarray:
    """C(e) for e in 0..E: harvest step applied to the type-averaged W."""
    w_next = next_values @ probs
    shifted = np.append(w_next[1:], w_next[-1])  # harvest clipped at the cap
    return q * shifted + (1.0 - q) * w_next


def _serve_defer(table: ValueTable, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Recompute (serve, defer) action values at slot n from row n+1.

    serve[e, k] is -inf where e < w(k).
    """
    cfg = table.config
    values, _, probs = type_arrays(cfg.types)
    weights = cfg.weight_ints()
    cont = _continuation(table.values[n + 1], probs, cfg.energy.harvest_probability)
    E = cfg.energy_cap
    serve = np.full((E + 1, cfg.n_types), -np.inf)
    for k in range(cfg.n_types):
        w = int(weights[k])
        serve[w:, k] = values[k] + cont[: E + 1 - w]
    defer = np.repeat(cont[:, None], cfg.n_types, axis=1)
    return serve, defer


def build_value_table(config: DpConfig, max_cells: int = 50_000_000) -> ValueTable:
    """Backward induction over all (slot, energy, type) states."""
    N, E, K = config.n_slots, config.energy_cap, config.n_types
    cells = (N + 2) * (E + 1) * K
    if cells > max_cells:
        raise ResourceError(
            f"value table needs {cells} cells (cap {max_cells}); "
            "shrink the horizon or the energy cap"
        )
    values, _, probs = type_arrays(config.types)
    weights = config.weight_ints()
    q = config.energy.harvest_probability

    V = np.zeros((N + 2, E + 1, K))
    for n in range(N, 0, -1):
        cont = _continuation(V[n + 1], probs, q)
        row = np.repeat(cont[:, None], K, axis=1)  # defer everywhere
        for k in range(K):
            w = int(weights[k])
            serve_k = values[k] + cont[: E + 1 - w]
            np.maximum(row[w:, k], serve_k, out=row[w:, k])
        V[n] = row
    return ValueTable(config, V)


def extract_thresholds(table: ValueTable, tol: float = 0.0) -> ThresholdTable:
    """Minimal energy at which serving is weakly optimal, per slot and type.

    eta[n, k] = min { e >= w(k) : serve(e, k) >= defer(e, k) - tol }, or
    energy_cap + 1 when serving is never weakly optimal at slot n.  A small
    ``tol`` counts exact serve/defer ties as serve even when rounding noise
    nudges the computed advantage a hair below zero.
    """
    cfg = table.config
    N, E, K = cfg.n_slots, cfg.energy_cap, cfg.n_types
    eta = np.zeros((N + 1, K), dtype=np.int64)
    for n in range(1, N + 1):
        serve, defer = _serve_defer(table, n)
        ok = serve >= defer - tol  # -inf rows where e < w(k) are never ok
        any_ok = ok.any(axis=0)
        first = np.argmax(ok, axis=0)
        eta[n] = np.where(any_ok, first, E + 1)
    return ThresholdTable(cfg, eta)


def exhaustive_policy_oracle(
    config: DpConfig,
    initial_energy: int,
    max_scenarios: int = 1_000_000,
) -> float:
    """Optimal expected value by brute-force scenario-tree search.

    Walks every (type draw, harvest draw, decision) branch recursively with
    no state-space collapsing, so it is an independent oracle for
    :func:`build_value_table` on tiny configs.  Refuses runs where
    (2K)^N exceeds ``max_scenarios``.
    """
    N, E, K = config.n_slots, config.energy_cap, config.n_types
    if (2 * K) ** N > max_scenarios:
        raise ResourceError(
            f"scenario tree has (2*{K})^{N} leaves (cap {max_scenarios})"
        )
    e0 = _as_energy_state(initial_energy, E)
    values, _, probs = type_arrays(config.types)
    weights = config.weight_ints()
    q = config.energy.harvest_probability

    def expected_from(n: int, e: int) -> float:
        """Expected value before the slot-n type draw, battery at e."""
        if n > N:
            return 0.0
        #  Identical sibling subtrees (same post-decision energy) are
        #  evaluated once per node; nothing is shared across nodes.
        local: dict[int, float] = {}

        def continuation(e_after: int) -> float:
            if e_after not in local:
                up = min(e_after + 1, E)
                if q == 0.0:
                    local[e_after] = expected_from(n + 1, e_after)
                elif q == 1.0:
                    local[e_after] = expected_from(n + 1, up)
                else:
                    local[e_after] = q * expected_from(n + 1, up) + (1.0 - q) * expected_from(n + 1, e_after)
            return local[e_after]

        total = 0.0
        for k in range(K):
            if probs[k] == 0.0:
                continue
            best = continuation(e)
            w = int(weights[k])
            if e >= w:
                best = max(best, values[k] + continuation(e - w))
            total += probs[k] * best
        return total

    return expected_from(1, e0)


# ---------------------------------------------------------------------------
# Structural diagnostics.  Each returns a PropertyReport; none raises on a
# violation, because monotone values are guaranteed but concavity and the
# supermodularity pair only hold under extra distributional conditions.
# ---------------------------------------------------------------------------

def _first_violation(mask: np.ndarray, describe) -> str:
    idx = np.argwhere(mask)
    if idx.size == 0:
        return ""
    return describe(tuple(int(i) for i in idx[0]))


def check_value_monotonicity(table: ValueTable, tol: float = 1e-9) -> PropertyReport:
    """V_n(e, k) nondecreasing in e."""
    diffs = np.diff(table.values[1:], axis=1)
    bad = diffs < -tol
    detail = _first_violation(
        bad, lambda i: f"n={i[0] + 1} e={i[1]}->{i[1] + 1} k={i[2]}"
    )
    return PropertyReport("value-monotone-in-energy", not bad.any(), int(diffs.size), detail)


def check_value_concavity(table: ValueTable, tol: float = 1e-9) -> PropertyReport:
    """Marginal value of energy V_n(e+1) - V_n(e) nonincreasing in e."""
    diffs = np.diff(table.values[1:], axis=1)
    second = np.diff(diffs, axis=1)
    bad = second > tol
    detail = _first_violation(
        bad, lambda i: f"n={i[0] + 1} e={i[1]} k={i[2]}"
    )
    return PropertyReport("value-concave-in-energy", not bad.any(), int(second.size), detail)


def check_supermodularity(table: ValueTable, tol: float = 1e-9) -> PropertyReport:
    """Serve-minus-defer advantage nondecreasing in energy (slot by slot).

    This is the (energy, action) supermodularity that makes the optimal
    policy a threshold policy.
    """
    cfg = table.config
    bad_at = ""
    checked = 0
    ok = True
    for n in range(1, cfg.n_slots + 1):
        serve, defer = _serve_defer(table, n)
        adv = serve - defer
        for k in range(cfg.n_types):
            w = int(round(cfg.types[k].weight))
            d = np.diff(adv[w:, k])
            checked += d.size
            if ok and np.any(d < -tol):
                e = int(np.argmax(d < -tol)) + w
                bad_at = f"n={n} e={e}->{e + 1} k={k}"
                ok = False
    return PropertyReport("serve-advantage-monotone-in-energy", ok, checked, bad_at)


def check_slot_supermodularity(table: ValueTable, tol: float = 1e-9) -> PropertyReport:
    """Serve-minus-defer advantage nondecreasing in the slot index.

    Diagnostic only: serving should look (weakly) better as fewer slots
    remain.  Holds in the regimes behind the closed-form threshold policy
    but is not guaranteed for every type distribution.
    """
    cfg = table.config
    prev = None
    checked = 0
    ok = True
    bad_at = ""
    for n in range(1, cfg.n_slots + 1):
        serve, defer = _serve_defer(table, n)
        adv = serve - defer
        if prev is not None:
            finite = np.isfinite(adv) & np.isfinite(prev)
            checked += int(finite.sum())
            drop = finite & (adv < prev - tol)
            if ok and drop.any():
                e, k = (int(x) for x in np.argwhere(drop)[0])
                bad_at = f"n={n - 1}->{n} e={e} k={k}"
                ok = False
        prev = adv
    return PropertyReport("serve-advantage-monotone-in-slot", ok, checked, bad_at)


def check_threshold_structure(table: ValueTable, tol: float = 0.0) -> PropertyReport:
    """The serve-optimal region is an up-set in energy for every (n, k).

    Equivalently: decisions reproduce "serve iff e >= eta[n, k]" for the
    extracted thresholds, with serve/defer gaps inside ``tol`` counted as
    serve on both sides of the comparison.
    """
    cfg = table.config
    eta = extract_thresholds(table, tol).eta
    checked = 0
    ok = True
    bad_at = ""
    for n in range(1, cfg.n_slots + 1):
        serve, defer = _serve_defer(table, n)
        want = serve >= defer - tol
        e_axis = np.arange(cfg.energy_cap + 1)[:, None]
        predicted = e_axis >= eta[n][None, :]
        checked += want.size
        if ok and np.any(want != predicted):
            e, k = (int(x) for x in np.argwhere(want != predicted)[0])
            bad_at = f"n={n} e={e} k={k} eta={int(eta[n, k])}"
            ok = False
    return PropertyReport("serve-region-is-threshold", ok, checked, bad_at)


def check_threshold_monotone_in_slot(thresholds: ThresholdTable) -> PropertyReport:
    """eta[n, k] nonincreasing in n: the policy only relaxes over time."""
    eta = thresholds.eta[1:]
    diffs = np.diff(eta, axis=0)
    bad = diffs > 0
    detail = _first_violation(
        bad, lambda i: f"n={i[0] + 1}->{i[0] + 2} k={i[1]}"
    )
    return PropertyReport("threshold-monotone-in-slot", not bad.any(), int(diffs.size), detail)


def run_structure_checks(table: ValueTable, tol: float = 1e-9) -> list[PropertyReport]:
    """All structural diagnostics for one table, in a stable order."""
    return [
        check_value_monotonicity(table, tol),
        check_value_concavity(table, tol),
        check_supermodularity(table, tol),
        check_slot_supermodularity(table, tol),
        check_threshold_structure(table, tol),
        check_threshold_monotone_in_slot(extract_thresholds(table, tol)),
    ]
