"""Rule-based threshold tests with a quadrature centroid oracle."""

import json
import math

import numpy as np
import pytest
from scipy.integrate import quad

from admitsim import EfficiencyBounds, EnergyArrivalSchedule, ParameterError
from admitsim.fuzzy import (
    CLOSENESS_LEVELS,
    DEFAULT_RULES,
    FULLNESS_LEVELS,
    OUTPUT_LEVELS,
    FuzzySystem,
    FuzzyThresholdPolicy,
    HarvestWindow,
    TrapezoidMf,
    default_fuzzy_system,
    fuzzy_system_from_dict,
    infer_threshold,
    load_fuzzy_system,
)
from admitsim.instances import (
    RandomSource,
    generate_deterministic_instance,
)
from admitsim.policies import run_policy_trace

SYSTEM = default_fuzzy_system()
CENTERS = {label: i / 4.0 for i, label in enumerate(OUTPUT_LEVELS)}
RANK = {label: i for i, label in enumerate(OUTPUT_LEVELS)}


def centroid_oracle(mf, alpha=1.0):
    """Centroid of min(mf, alpha) over its support by adaptive quadrature."""
    clipped = lambda x: min(float(mf.membership(x)), alpha)
    num, _ = quad(lambda x: x * clipped(x), mf.a, mf.d, limit=200)
    den, _ = quad(clipped, mf.a, mf.d, limit=200)
    return num / den


# ---------------------------------------------------------------------------
# membership functions
# ---------------------------------------------------------------------------

def test_trapezoid_shape():
    mf = TrapezoidMf(0.1, 0.3, 0.5, 0.7)
    assert mf.membership(0.0) == 0.0
    assert mf.membership(0.2) == pytest.approx(0.5)
    assert mf.membership(0.4) == 1.0
    assert mf.membership(0.6) == pytest.approx(0.5)
    assert mf.membership(0.9) == 0.0


def test_trapezoid_breakpoints_must_be_sorted():
    with pytest.raises(ParameterError):
        TrapezoidMf(0.5, 0.3, 0.6, 0.7)


def test_level_bank_is_a_partition_of_unity():
    for bank in (SYSTEM.closeness, SYSTEM.fullness, SYSTEM.output):
        xs = np.linspace(0.0, 1.0, 401)
        total = sum(mf.membership(xs) for mf in bank.values())
        assert np.allclose(total, 1.0)


def test_label_centers_fire_exactly_one_level():
    for i, label in enumerate(FULLNESS_LEVELS):
        x = i / 4.0
        for other, mf in SYSTEM.fullness.items():
            expected = 1.0 if other == label else 0.0
            assert float(mf.membership(x)) == pytest.approx(expected)


# ---------------------------------------------------------------------------
# rule table and inference
# ---------------------------------------------------------------------------

def test_rule_table_is_total_and_known():
    assert len(DEFAULT_RULES) == 25
    assert set(DEFAULT_RULES) == {
        (c, f) for c in CLOSENESS_LEVELS for f in FULLNESS_LEVELS
    }
    assert set(DEFAULT_RULES.values()) <= set(OUTPUT_LEVELS)


def test_missing_rule_is_rejected():
    rules = dict(DEFAULT_RULES)
    del rules[("medium", "medium")]
    with pytest.raises(ParameterError):
        FuzzySystem(
            closeness=SYSTEM.closeness, fullness=SYSTEM.fullness,
            output=SYSTEM.output, rules=rules,
        )


def test_single_rule_fires_at_every_center_pair():
    for ci, c_label in enumerate(CLOSENESS_LEVELS):
        for fi, f_label in enumerate(FULLNESS_LEVELS):
            acts = SYSTEM.rule_activations(ci / 4.0, fi / 4.0)
            hot = {k: a for k, a in acts.items() if a > 0.0}
            assert hot == {(c_label, f_label): 1.0}


def test_center_inference_matches_the_label_centroid_oracle():
    # at center inputs the aggregate is exactly one full output trapezoid,
    # so the defuzzified value must match its quadrature centroid
    for (c_label, f_label), out_label in DEFAULT_RULES.items():
        c = CLOSENESS_LEVELS.index(c_label) / 4.0
        f = FULLNESS_LEVELS.index(f_label) / 4.0
        got = infer_threshold(c, f, SYSTEM)
        want = centroid_oracle(SYSTEM.output[out_label])
        assert got == pytest.approx(want, abs=1e-6)


def test_imminent_harvest_depleted_battery_gives_the_medium_threshold():
    # the interior medium trapezoid is symmetric about 0.5
    assert infer_threshold(0.95, 0.95, SYSTEM) == pytest.approx(0.5, abs=1e-9)


def test_distant_harvest_depleted_battery_is_strictly_more_selective():
    assert infer_threshold(0.05, 0.95, SYSTEM) > infer_threshold(0.95, 0.95, SYSTEM)


def test_inference_stays_within_the_extreme_centroids():
    lo = centroid_oracle(SYSTEM.output["very-low"])
    hi = centroid_oracle(SYSTEM.output["very-high"])
    rng = np.random.default_rng(12)
    for _ in range(100):
        t = infer_threshold(float(rng.uniform(-0.2, 1.2)),
                            float(rng.uniform(-0.2, 1.2)), SYSTEM)
        assert lo - 1e-4 <= t <= hi + 1e-4


def test_mixed_inputs_blend_against_the_oracle():
    # off-center inputs activate four rules; replicate the full min-max
    # aggregation with quadrature instead of the fixed grid
    c, f = 0.6, 0.3
    acts = SYSTEM.rule_activations(c, f)
    strength = {}
    for key, alpha in acts.items():
        out = SYSTEM.rules[key]
        strength[out] = max(strength.get(out, 0.0), alpha)

    def aggregate(x):
        return max(
            min(float(SYSTEM.output[lbl].membership(x)), a)
            for lbl, a in strength.items()
        )

    lo = min(SYSTEM.output[lbl].a for lbl in strength)
    hi = max(SYSTEM.output[lbl].d for lbl in strength)
    num, _ = quad(lambda x: x * aggregate(x), lo, hi, limit=400)
    den, _ = quad(aggregate, lo, hi, limit=400)
    assert infer_threshold(c, f, SYSTEM) == pytest.approx(num / den, abs=1e-4)


def test_rows_are_nondecreasing_in_fullness_at_centers():
    for ci in range(5):
        vals = [infer_threshold(ci / 4.0, fi / 4.0, SYSTEM) for fi in range(5)]
        assert all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))


def test_inference_is_continuous():
    for c in (0.0, 0.3, 0.62, 1.0):
        prev = None
        for f in np.arange(0.0, 1.0001, 0.01):
            t = infer_threshold(c, float(f), SYSTEM)
            if prev is not None:
                assert abs(t - prev) < 0.05
            prev = t


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def test_dict_round_trip_preserves_inference(tmp_path):
    doc = SYSTEM.to_dict()
    again = fuzzy_system_from_dict(json.loads(json.dumps(doc)))
    rng = np.random.default_rng(3)
    for _ in range(25):
        c, f = float(rng.uniform(0, 1)), float(rng.uniform(0, 1))
        assert infer_threshold(c, f, again) == infer_threshold(c, f, SYSTEM)
    path = tmp_path / "system.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    loaded = load_fuzzy_system(path)
    assert infer_threshold(0.4, 0.7, loaded) == infer_threshold(0.4, 0.7, SYSTEM)


def test_from_dict_rejects_malformed_documents():
    with pytest.raises(ParameterError):
        fuzzy_system_from_dict({"inputs": {}, "output": [], "rules": [], "x": 1})
    doc = SYSTEM.to_dict()
    doc["rules"] = doc["rules"][:-1]
    with pytest.raises(ParameterError):
        fuzzy_system_from_dict(doc)


# ---------------------------------------------------------------------------
# windows and the trace policy
# ---------------------------------------------------------------------------

def test_harvest_window_conventions():
    w = HarvestWindow(interval_start=0, next_arrival=10, budget_at_start=4.0,
                      consumed=1.0)
    assert w.closeness(0) == 0.0
    assert w.closeness(5) == 0.5
    assert w.closeness(10) == 1.0
    assert w.fullness() == 0.25
    tail = HarvestWindow(interval_start=50, next_arrival=None,
                         budget_at_start=4.0, consumed=4.0)
    assert tail.closeness(99) == 0.0  # no upcoming harvest: treat as far
    assert tail.fullness() == 1.0
    broke = HarvestWindow(interval_start=0, next_arrival=10,
                          budget_at_start=0.0, consumed=0.0)
    assert broke.fullness() == 1.0


def test_policy_thresholds_live_in_the_efficiency_interval():
    bounds = EfficiencyBounds(6.0, 10.0)
    sched = EnergyArrivalSchedule(((0, 50.0), (60, 40.0), (140, 30.0)))
    inst = generate_deterministic_instance(
        200, bounds, (1.0, 4.0), sched, RandomSource(44).generator(0), 0.1
    )
    trace = run_policy_trace(inst, FuzzyThresholdPolicy(bounds))
    assert trace.steps
    for step in trace.steps:
        assert bounds.lower - 1e-9 <= step.threshold <= bounds.upper + 1e-9
    used = 0.0
    for step in trace.steps:
        used += step.weight * step.served
        assert used <= inst.schedule.cumulative_through(step.slot) + 1e-9


def test_policy_relaxes_as_the_harvest_approaches():
    # same consumption level, battery-rich interval: the threshold right
    # before a harvest is no higher than right after the previous one
    w_start = HarvestWindow(0, 100, 50.0, 10.0)
    w_end = HarvestWindow(0, 100, 50.0, 10.0)
    early = infer_threshold(w_start.closeness(5), w_start.fullness(), SYSTEM)
    late = infer_threshold(w_end.closeness(99), w_end.fullness(), SYSTEM)
    assert late <= early + 1e-9
