"""Offline optimum tests against a naive in-test enumerator."""

from itertools import product

import numpy as np
import pytest

from admitsim import (
    EfficiencyBounds,
    EnergyArrivalSchedule,
    EpisodeInstance,
    ParameterError,
    RandomSource,
    ResourceError,
    UserDemand,
    generate_deterministic_instance,
)
from admitsim.offline import brute_force_offline, offline_value, solve_offline


def enumerate_optimum(instance):
    """Independent reference: try every selection, keep the best feasible one.

    Feasibility is the prefix rule: energy consumed through slot n may not
    exceed energy arrived through slot n (an arrival at slot n counts).
    """
    n = instance.horizon
    caps = [instance.schedule.cumulative_through(m) for m in range(1, n + 1)]
    best = 0.0
    for sel in product((0, 1), repeat=n):
        used = 0.0
        feasible = True
        for i, x in enumerate(sel):
            used += x * instance.users[i].weight
            if used > caps[i] + 1e-9:
                feasible = False
                break
        if feasible:
            value = sum(x * u.value for x, u in zip(sel, instance.users))
            best = max(best, value)
    return best


def six_user_instance():
    users = tuple(
        UserDemand(v, w)
        for v, w in [(10, 2), (4, 1), (9, 3), (2, 1), (8, 2), (6, 2)]
    )
    return EpisodeInstance(6, users, EnergyArrivalSchedule(((0, 3.0), (4, 3.0))))


def random_instance(rng, n, integer_weights=True):
    weights = rng.integers(1, 5, size=n).astype(float) if integer_weights \
        else rng.uniform(0.5, 4.0, size=n)
    # dyadic values (multiples of 1/64) make subset sums exact in float64,
    # so solver totals can be compared bitwise regardless of summation order
    values = np.round(weights * rng.uniform(2.0, 9.0, size=n) * 64) / 64
    values = np.maximum(values, 1.0 / 64)
    users = tuple(UserDemand(v, w) for v, w in zip(values, weights))
    n_arrivals = min(n, int(rng.integers(1, 4)))
    slots = sorted(rng.choice(np.arange(0, n), size=n_arrivals, replace=False).tolist())
    amounts = rng.integers(1, 8, size=n_arrivals).astype(float)
    return EpisodeInstance(
        n, users, EnergyArrivalSchedule(tuple(zip(slots, amounts.tolist())))
    )


# ---------------------------------------------------------------------------
# frozen examples
# ---------------------------------------------------------------------------

def test_empty_instance():
    inst = EpisodeInstance(0, (), EnergyArrivalSchedule(((0, 5.0),)))
    sol = solve_offline(inst, 1)
    assert sol.total_value == 0.0 and sol.selection == ()


def test_single_feasible_user():
    inst = EpisodeInstance(
        1, (UserDemand(5.0, 1.0),), EnergyArrivalSchedule(((0, 1.0),))
    )
    sol = solve_offline(inst, 1)
    assert sol.total_value == 5.0 and sol.selection == (1,)


def test_six_user_example_value_24():
    inst = six_user_instance()
    assert enumerate_optimum(inst) == 24.0
    assert solve_offline(inst, 1).total_value == 24.0
    assert brute_force_offline(inst).total_value == 24.0
    assert offline_value(inst, 1) == 24.0


def test_nothing_fits():
    inst = EpisodeInstance(
        2, (UserDemand(5.0, 9.0), UserDemand(5.0, 9.0)),
        EnergyArrivalSchedule(((0, 4.0), (1, 4.0))),
    )
    for solver in (solve_offline, brute_force_offline):
        sol = solver(inst) if solver is brute_force_offline else solver(inst, 1)
        assert sol.total_value == 0.0
        assert all(x == 0 for x in sol.selection)


def test_everything_fits():
    users = tuple(UserDemand(float(v), 1.0) for v in (3, 7, 2))
    inst = EpisodeInstance(3, users, EnergyArrivalSchedule(((0, 10.0),)))
    sol = solve_offline(inst, 1)
    assert sol.total_value == 12.0
    assert sol.selection == (1, 1, 1)


# ---------------------------------------------------------------------------
# cross-oracle sweeps
# ---------------------------------------------------------------------------

def test_solvers_match_enumerator_on_integer_instances():
    rng = np.random.default_rng(100)
    for _ in range(60):
        inst = random_instance(rng, int(rng.integers(1, 11)))
        ref = enumerate_optimum(inst)
        assert solve_offline(inst, 1).total_value == ref
        assert brute_force_offline(inst).total_value == ref


def test_scaled_solver_matches_brute_force_on_real_weights():
    rng = np.random.default_rng(200)
    for _ in range(30):
        n = int(rng.integers(1, 10))
        weights = np.round(rng.uniform(0.5, 4.0, size=n), 1)
        values = weights * rng.uniform(2.0, 9.0, size=n)
        users = tuple(UserDemand(v, w) for v, w in zip(values, weights))
        amount = round(float(rng.uniform(2.0, 9.0)), 1)
        inst = EpisodeInstance(n, users, EnergyArrivalSchedule(((0, amount),)))
        got = solve_offline(inst, 10).total_value
        ref = brute_force_offline(inst).total_value
        assert got == pytest.approx(ref, abs=1e-9)


def test_selection_is_prefix_feasible():
    rng = np.random.default_rng(300)
    for _ in range(30):
        inst = random_instance(rng, int(rng.integers(1, 12)))
        sol = solve_offline(inst, 1)
        used = 0.0
        for i, x in enumerate(sol.selection, start=1):
            used += x * inst.users[i - 1].weight
            assert used <= inst.schedule.cumulative_through(i) + 1e-9
        assert sol.total_weight == pytest.approx(used)
        assert sol.n_served == sum(sol.selection)


def test_extra_arrival_never_hurts():
    rng = np.random.default_rng(400)
    for _ in range(20):
        inst = random_instance(rng, int(rng.integers(2, 10)))
        base = solve_offline(inst, 1).total_value
        slot = int(rng.integers(0, inst.horizon))
        if any(s == slot for s, _ in inst.schedule.entries):
            continue
        entries = tuple(sorted(inst.schedule.entries + ((slot, 2.0),)))
        richer = EpisodeInstance(
            inst.horizon, inst.users, EnergyArrivalSchedule(entries)
        )
        assert solve_offline(richer, 1).total_value >= base


def test_value_only_path_agrees_with_full_solver():
    rng = np.random.default_rng(500)
    bounds = EfficiencyBounds(6.0, 10.0)
    sched = EnergyArrivalSchedule(((0, 20.0), (40, 15.0)))
    for trial in range(10):
        inst = generate_deterministic_instance(
            80, bounds, (1.0, 4.0), sched, RandomSource(2).generator(trial), 0.1
        )
        assert offline_value(inst, 10) == pytest.approx(
            solve_offline(inst, 10).total_value, abs=1e-9
        )


# ---------------------------------------------------------------------------
# guards
# ---------------------------------------------------------------------------

def test_brute_force_enumeration_guard():
    users = tuple(UserDemand(1.0, 1.0) for _ in range(23))
    inst = EpisodeInstance(23, users, EnergyArrivalSchedule(((0, 5.0),)))
    with pytest.raises(ResourceError):
        brute_force_offline(inst)


def test_scale_must_quantize_weights():
    inst = EpisodeInstance(
        1, (UserDemand(5.0, 0.35),), EnergyArrivalSchedule(((0, 1.0),))
    )
    with pytest.raises(ParameterError):
        solve_offline(inst, 10)
