"""Command line interface.

Subcommands:

* ``generate``    write an instance JSON (deterministic draw or one sampled
                  stochastic episode, depending on the preset)
* ``offline-opt`` exact offline optimum of an instance file
* ``dp-solve``    build the stochastic value table, report thresholds,
                  expected value and optional structure checks
* ``simulate``    run one named policy over an instance file
* ``compare``     Monte Carlo comparison (deterministic campaign or
                  stochastic batch, depending on the preset)
* ``ga-train``    evolve a bucket-threshold chromosome and save it

Exit codes: 0 on success, 2 for parameter/usage problems, 3 when a
computation exceeds a resource cap.  Any option can also be supplied via
``--config file.json`` (flag values win; unknown keys are rejected).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .dp import (
    DpConfig,
    build_value_table,
    exhaustive_policy_oracle,
    extract_thresholds,
    run_structure_checks,
)
from .errors import ParameterError, ResourceError
from .evaluation import (
    CampaignConfig,
    PolicySpec,
    run_campaign,
    stochastic_comparison,
)
from .fuzzy import default_fuzzy_system, load_fuzzy_system
from .ga import Chromosome, GaConfig, evolve
from .instances import (
    EfficiencyBounds,
    EnergyArrivalSchedule,
    EpisodeInstance,
    RandomSource,
    StochasticEnergyModel,
    UserType,
    generate_deterministic_instance,
    sample_stochastic_episode,
)
from .offline import solve_offline
from .policies import (
    POLICY_NAMES,
    dp_policy_decide,
    expected_threshold_decide,
    run_policy_trace,
    run_stochastic_trace,
)

#: Stochastic-model presets: two-type mixes and the five-type mixes, all
#: over 100 slots with 5 units of starting energy.
STOCHASTIC_PRESETS = {
    "fig4": {
        "n_slots": 100, "initial_energy": 5, "energy_cap": 105, "q": 0.65,
        "episodes": 10000,
        "types": ((5.0, 1.0, 0.3), (10.0, 1.0, 0.7)),
    },
    "fig5": {
        "n_slots": 100, "initial_energy": 5, "energy_cap": 105, "q": 0.65,
        "episodes": 10000,
        "types": ((5.0, 1.0, 0.7), (10.0, 1.0, 0.3)),
    },
    # The five-type mix; fig6 is the same mix with weights normalized to 1
    # (efficiencies preserved).
    "fig6": {
        "n_slots": 100, "initial_energy": 5, "energy_cap": 105, "q": 0.65,
        "episodes": 10000,
        "types": ((2.0 / 6.0, 1.0, 0.1), (5.0 / 8.0, 1.0, 0.3), (2.0, 1.0, 0.15),
                  (5.0, 1.0, 0.15), (10.0, 1.0, 0.3)),
    },
    "fig7": {
        "n_slots": 100, "initial_energy": 5, "energy_cap": 105, "q": 0.65,
        "episodes": 10000,
        "types": ((2.0, 6.0, 0.1), (5.0, 8.0, 0.3), (8.0, 4.0, 0.15),
                  (5.0, 1.0, 0.15), (10.0, 1.0, 0.3)),
    },
}

#: Deterministic campaign presets: a 1000-user day with 2000 units of energy
#: over ten harvests of distinct amounts, efficiencies in [6, 10], weights
#: on a 0.1 grid.  table1 and table2 are two readings of the same experiment
#: (ratios vs absolute values); both names are accepted.
_TABLE_AMOUNTS = (230.0, 170.0, 250.0, 130.0, 290.0, 110.0, 270.0, 150.0, 210.0, 190.0)
_TABLE_SCHEDULE = tuple((100 * j, a) for j, a in enumerate(_TABLE_AMOUNTS))
DETERMINISTIC_PRESETS = {
    "table1": {
        "n_users": 1000, "trials": 1000,
        "eff_low": 6.0, "eff_high": 10.0,
        "weight_low": 1.0, "weight_high": 4.0, "weight_step": 0.1,
        "scale": 10,
        "schedule": _TABLE_SCHEDULE,
        "policies": ("monotone", "jumping", "ga", "fuzzy"),
        "ga_pool_size": 32,
    },
}
DETERMINISTIC_PRESETS["table2"] = DETERMINISTIC_PRESETS["table1"]

GA_DEFAULTS = {
    "population": 50, "generations": 200, "crossover_rate": 0.9,
    "mutation_rate": 0.01, "mutation_scale": 0.5, "elitism": 2,
    "tournament": 3, "pool_size": 32,
}


def _parse_schedule(text: str) -> EnergyArrivalSchedule:
    """Parse 'slot:amount,slot:amount,...' into a schedule."""
    entries = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            slot_s, amount_s = part.split(":")
            entries.append((int(slot_s), float(amount_s)))
        except ValueError:
            raise ParameterError(
                f"bad schedule entry {part!r}; expected slot:amount"
            ) from None
    return EnergyArrivalSchedule(tuple(entries))


def _parse_types(text: str) -> tuple[UserType, ...]:
    """Parse 'value:weight:prob,...' into types sorted by efficiency."""
    parsed = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            v_s, w_s, p_s = part.split(":")
            parsed.append(UserType(float(v_s), float(w_s), float(p_s)))
        except ValueError:
            raise ParameterError(
                f"bad type entry {part!r}; expected value:weight:prob"
            ) from None
    if not parsed:
        raise ParameterError("no user types given")
    return tuple(sorted(parsed, key=lambda t: t.efficiency))


def _types_from_preset(preset: dict) -> tuple[UserType, ...]:
    return tuple(UserType(v, w, p) for v, w, p in preset["types"])


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_json(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: not valid JSON ({exc})") from None


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill unset options from the --config JSON; reject unknown keys."""
    if getattr(args, "config", None) is None:
        return
    doc = _load_json(args.config)
    if not isinstance(doc, dict):
        raise ParameterError(f"{args.config}: config must be a JSON object")
    allowed = {a.dest for a in parser._actions} - {"help", "config"}
    unknown = set(doc) - allowed
    if unknown:
        raise ParameterError(
            f"{args.config}: unknown config keys {sorted(unknown)} "
            f"(allowed: {sorted(allowed)})"
        )
    for key, value in doc.items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)


def _pick(args, name, preset, preset_key=None, fallback=None):
    """Explicit flag, else preset value, else fallback."""
    explicit = getattr(args, name, None)
    if explicit is not None:
        return explicit
    if preset is not None and (preset_key or name) in preset:
        return preset[preset_key or name]
    return fallback


def _require(value, what: str):
    if value is None:
        raise ParameterError(f"{what} is required (flag, preset or config)")
    return value


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    seed = args.seed if args.seed is not None else 0
    trial = args.trial if args.trial is not None else 0
    rng = RandomSource(seed).generator(trial)
    if args.preset in STOCHASTIC_PRESETS:
        preset = STOCHASTIC_PRESETS[args.preset]
        instance = sample_stochastic_episode(
            _types_from_preset(preset),
            StochasticEnergyModel(preset["q"]),
            preset["n_slots"],
            preset["initial_energy"],
            rng,
        )
    else:
        preset = DETERMINISTIC_PRESETS.get(args.preset) if args.preset else None
        if args.preset and preset is None:
            raise ParameterError(f"unknown preset {args.preset!r}")
        n_users = int(_require(_pick(args, "users", preset, "n_users"), "--users"))
        bounds = EfficiencyBounds(
            float(_require(_pick(args, "eff_low", preset), "--eff-low")),
            float(_require(_pick(args, "eff_high", preset), "--eff-high")),
        )
        w_lo = float(_require(_pick(args, "weight_low", preset), "--weight-low"))
        w_hi = float(_require(_pick(args, "weight_high", preset), "--weight-high"))
        step = _pick(args, "weight_step", preset)
        schedule = _pick(args, "schedule", preset)
        capacity = getattr(args, "capacity", None)
        if capacity is not None:
            if schedule is not None:
                raise ParameterError("--capacity/--harvests and --schedule are exclusive")
            j = int(args.harvests if args.harvests is not None else 1)
            if j < 1:
                raise ParameterError(f"--harvests must be >= 1, got {j}")
            spacing = max(1, n_users // j)
            schedule = tuple((i * spacing, float(capacity) / j) for i in range(j))
        schedule = _require(schedule, "--schedule")
        if isinstance(schedule, str):
            schedule = _parse_schedule(schedule)
        elif not isinstance(schedule, EnergyArrivalSchedule):
            schedule = EnergyArrivalSchedule(tuple((int(s), float(a)) for s, a in schedule))
        instance = generate_deterministic_instance(
            n_users, bounds, (w_lo, w_hi), schedule, rng,
            float(step) if step is not None else None,
        )
    _emit(instance.to_dict(), args.out)
    return 0


# ---------------------------------------------------------------------------
# offline-opt
# ---------------------------------------------------------------------------

def cmd_offline_opt(args) -> int:
    instance = EpisodeInstance.load(args.instance)
    solution = solve_offline(instance, args.scale if args.scale is not None else 1)
    doc = {
        "total_value": solution.total_value,
        "total_weight": solution.total_weight,
        "n_served": solution.n_served,
    }
    if args.show_selection:
        doc["selection"] = [int(b) for b in solution.selection]
    _emit(doc, args.out)
    return 0


# ---------------------------------------------------------------------------
# dp-solve
# ---------------------------------------------------------------------------

def _stochastic_model_from_args(args) -> tuple[tuple[UserType, ...], float, int, int]:
    """(types, q, n_slots, energy_cap) from preset and/or flags."""
    preset = STOCHASTIC_PRESETS.get(args.preset) if getattr(args, "preset", None) else None
    if getattr(args, "preset", None) and preset is None:
        raise ParameterError(f"unknown stochastic preset {args.preset!r}")
    types_arg = getattr(args, "types", None)
    if types_arg is not None:
        types = _parse_types(types_arg)
    elif preset is not None:
        types = _types_from_preset(preset)
    else:
        raise ParameterError("--types or a fig preset is required")
    q = float(_require(_pick(args, "q", preset), "--q"))
    n_slots = int(_require(_pick(args, "slots", preset, "n_slots"), "--slots"))
    cap = int(_require(_pick(args, "energy_cap", preset), "--energy-cap"))
    return types, q, n_slots, cap


def cmd_dp_solve(args) -> int:
    types, q, n_slots, cap = _stochastic_model_from_args(args)
    config = DpConfig(n_slots, types, StochasticEnergyModel(q), cap)
    table = build_value_table(config)
    thresholds = extract_thresholds(table)
    preset = STOCHASTIC_PRESETS.get(args.preset) if args.preset else None
    e0 = int(_pick(args, "initial_energy", preset, fallback=0))
    doc = {
        "expected_value": table.expected_value(e0),
        "initial_energy": e0,
        "thresholds": thresholds.to_dict(),
    }
    if args.checks:
        reports = run_structure_checks(table)
        doc["checks"] = [str(r) for r in reports]
        for r in reports:
            print(r)
    if args.verify:
        oracle = exhaustive_policy_oracle(config, e0)
        delta = abs(oracle - doc["expected_value"])
        doc["oracle_value"] = oracle
        print(f"oracle_value={oracle:.12g} dp_value={doc['expected_value']:.12g} "
              f"delta={delta:.3g}")
    _emit(doc, args.out)
    return 0


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _bounds_from_args(args, what: str) -> EfficiencyBounds:
    lo, hi = getattr(args, "eff_low", None), getattr(args, "eff_high", None)
    if lo is None or hi is None:
        raise ParameterError(f"{what} needs --eff-low and --eff-high")
    return EfficiencyBounds(float(lo), float(hi))


def cmd_simulate(args) -> int:
    from .evaluation import build_policy  # local to keep import surface flat

    instance = EpisodeInstance.load(args.instance)
    name = args.policy
    if name not in POLICY_NAMES:
        raise ParameterError(f"unknown policy {name!r}; choose from {', '.join(POLICY_NAMES)}")

    if name in ("dp", "expected-threshold"):
        types, q, n_slots, cap = _stochastic_model_from_args(args)
        if n_slots != instance.horizon:
            raise ParameterError(
                f"model horizon {n_slots} != instance horizon {instance.horizon}"
            )
        config = DpConfig(n_slots, types, StochasticEnergyModel(q), cap)
        if name == "dp":
            thresholds = extract_thresholds(build_value_table(config))

            def decide(state, k, demand):
                return dp_policy_decide(state, k, thresholds)
        else:
            include = not args.future_slots_only

            def decide(state, k, demand):
                return expected_threshold_decide(state, k, types, q, include)

        trace = run_stochastic_trace(instance, types, decide, energy_cap=cap)
    else:
        if name == "conservative":
            best = args.best_efficiency
            if best is None and getattr(args, "preset", None):
                types, _, _, _ = _stochastic_model_from_args(args)
                best = max(t.efficiency for t in types)
            spec = PolicySpec(name, best_efficiency=float(_require(best, "--best-efficiency")))
            policy = build_policy(spec, EfficiencyBounds(1.0, 1.0))
        elif name == "greedy":
            policy = build_policy(PolicySpec(name), EfficiencyBounds(1.0, 1.0))
        elif name == "ga":
            doc = _load_json(_require(args.ga_chromosome, "--ga-chromosome"))
            policy = build_policy(
                PolicySpec(name, thresholds=tuple(doc["thresholds"])),
                EfficiencyBounds(1.0, 1.0),
            )
        else:  # monotone | jumping | fuzzy
            bounds = _bounds_from_args(args, name)
            system = load_fuzzy_system(args.fuzzy_system) if (
                name == "fuzzy" and args.fuzzy_system
            ) else None
            policy = build_policy(PolicySpec(name), bounds, system)
        trace = run_policy_trace(instance, policy)

    doc = {
        "policy": name,
        "total_value": trace.total_value,
        "total_weight": trace.total_weight,
        "n_served": trace.n_served,
    }
    if args.trace:
        doc["steps"] = [
            {
                "slot": s.slot, "value": s.value, "weight": s.weight,
                "energy_before": s.energy_before, "served": s.served,
                "threshold": s.threshold,
            }
            for s in trace.steps
        ]
    _emit(doc, args.out)
    return 0


# ---------------------------------------------------------------------------
# compare
# ---------------------------------------------------------------------------

def _campaign_config_from(args, preset: dict) -> tuple[CampaignConfig, dict]:
    trials = int(_pick(args, "trials", preset, fallback=preset["trials"]))
    seed = int(args.seed if args.seed is not None else 0)
    schedule_arg = _pick(args, "schedule", preset)
    if isinstance(schedule_arg, str):
        schedule = _parse_schedule(schedule_arg)
    else:
        schedule = EnergyArrivalSchedule(tuple((int(s), float(a)) for s, a in schedule_arg))
    bounds = EfficiencyBounds(
        float(_pick(args, "eff_low", preset)), float(_pick(args, "eff_high", preset))
    )
    policy_names = _pick(args, "policies", preset)
    if isinstance(policy_names, str):
        policy_names = tuple(p.strip() for p in policy_names.split(",") if p.strip())
    base = {
        "n_users": int(_pick(args, "users", preset, "n_users")),
        "bounds": bounds,
        "weight_range": (float(_pick(args, "weight_low", preset)),
                         float(_pick(args, "weight_high", preset))),
        "weight_step": _pick(args, "weight_step", preset),
        "offline_scale": int(_pick(args, "scale", preset)),
        "schedule": schedule,
    }

    specs = []
    ga_doc = None
    for name in policy_names:
        if name == "ga":
            if args.ga_chromosome:
                ga_doc = _load_json(args.ga_chromosome)
                thresholds = tuple(float(t) for t in ga_doc["thresholds"])
            else:
                pool_rng = RandomSource(seed)
                pool = tuple(
                    generate_deterministic_instance(
                        base["n_users"], bounds, base["weight_range"],
                        schedule, pool_rng.generator(1_000_000 + i),
                        base["weight_step"],
                    )
                    for i in range(int(_pick(args, "pool_size", preset, "ga_pool_size")))
                )
                result = evolve(GaConfig(
                    bounds=bounds, training_pool=pool,
                    offline_scale=base["offline_scale"], seed=seed,
                ))
                thresholds = tuple(float(t) for t in result.best.thresholds)
                ga_doc = {
                    "bounds": {"lower": bounds.lower, "upper": bounds.upper},
                    "thresholds": list(thresholds),
                    "fitness": result.best_fitness,
                    "history": result.history,
                }
            specs.append(PolicySpec("ga", thresholds=thresholds))
        elif name == "conservative":
            specs.append(PolicySpec(name, best_efficiency=bounds.upper))
        else:
            specs.append(PolicySpec(name))

    config = CampaignConfig(
        n_trials=trials, policies=tuple(specs), seed=seed, **base
    )
    return config, (ga_doc or {})


def cmd_compare(args) -> int:
    preset_name = _require(args.preset, "--preset")
    out_dir = Path(args.out_dir if args.out_dir is not None else ".")
    out_dir.mkdir(parents=True, exist_ok=True)

    if preset_name in DETERMINISTIC_PRESETS:
        config, ga_doc = _campaign_config_from(args, DETERMINISTIC_PRESETS[preset_name])
        report = run_campaign(config, threads=int(args.threads or 1))
        report.write_csv(out_dir / "report.csv")
        summary = report.summary_dict()
        summary["preset"] = preset_name
        summary["config"] = {
            "trials": config.n_trials,
            "users": config.n_users,
            "eff_low": config.bounds.lower,
            "eff_high": config.bounds.upper,
            "weight_low": config.weight_range[0],
            "weight_high": config.weight_range[1],
            "weight_step": config.weight_step,
            "scale": config.offline_scale,
            "schedule": [[s, a] for s, a in config.schedule.entries],
            "policies": [spec.name for spec in config.policies],
            "seed": config.seed,
        }
        (out_dir / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        if ga_doc:
            (out_dir / "chromosome.json").write_text(
                json.dumps(ga_doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
            )
        print(f"offline mean_value={summary['offline']['mean_value']:.4f}")
        for name, s in summary["policies"].items():
            print(
                f"policy={name} mean_ratio={s['mean_ratio']:.4f} "
                f"worst_ratio={s['worst_ratio']:.4f} mean_value={s['mean_value']:.4f}"
            )
        if report.invalid_trials:
            print(f"invalid_trials={report.invalid_trials}")
        return 0

    if preset_name in STOCHASTIC_PRESETS:
        preset = STOCHASTIC_PRESETS[preset_name]
        types = _types_from_preset(preset)
        episodes = int(_pick(args, "episodes", preset, fallback=preset["episodes"]))
        seed = int(args.seed if args.seed is not None else 0)
        report = stochastic_comparison(
            types, preset["q"], preset["n_slots"], preset["initial_energy"],
            preset["energy_cap"], episodes, seed,
            include_current_slot=not args.future_slots_only,
        )
        summary = report.summary_dict()
        summary["preset"] = preset_name
        summary["config"] = {
            "types": [[t.value, t.weight, t.probability] for t in types],
            "q": preset["q"],
            "slots": preset["n_slots"],
            "initial_energy": preset["initial_energy"],
            "energy_cap": preset["energy_cap"],
            "episodes": episodes,
            "seed": seed,
        }
        (out_dir / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        names = list(report.policies)
        with open(out_dir / "trajectories.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write("slot," + ",".join(names) + "\n")
            for i in range(preset["n_slots"]):
                cells = ",".join(repr(report.policies[n].trajectory[i]) for n in names)
                fh.write(f"{i + 1},{cells}\n")
        print(f"dp_expected_value={report.dp_expected_value:.4f}")
        for name, s in report.policies.items():
            print(f"policy={name} mean={s.mean:.4f} stderr={s.stderr:.4f}")
        if report.bound is not None:
            print(
                f"upper_bound={report.bound.bound:.4f} regime={report.bound.regime} "
                f"with_battery={report.bound_with_battery:.4f}"
            )
        return 0

    raise ParameterError(f"unknown preset {preset_name!r}")


# ---------------------------------------------------------------------------
# ga-train
# ---------------------------------------------------------------------------

def cmd_ga_train(args) -> int:
    preset = DETERMINISTIC_PRESETS.get(args.preset) if args.preset else None
    if args.preset and preset is None:
        raise ParameterError(f"unknown deterministic preset {args.preset!r}")
    seed = int(args.seed if args.seed is not None else 0)
    bounds = EfficiencyBounds(
        float(_require(_pick(args, "eff_low", preset), "--eff-low")),
        float(_require(_pick(args, "eff_high", preset), "--eff-high")),
    )
    schedule_arg = _require(_pick(args, "schedule", preset), "--schedule")
    if isinstance(schedule_arg, str):
        schedule = _parse_schedule(schedule_arg)
    else:
        schedule = EnergyArrivalSchedule(tuple((int(s), float(a)) for s, a in schedule_arg))
    n_users = int(_require(_pick(args, "users", preset, "n_users"), "--users"))
    weight_range = (
        float(_require(_pick(args, "weight_low", preset), "--weight-low")),
        float(_require(_pick(args, "weight_high", preset), "--weight-high")),
    )
    weight_step = _pick(args, "weight_step", preset)
    scale = int(_pick(args, "scale", preset, fallback=1))
    pool_size = int(_pick(args, "pool_size", preset, "ga_pool_size",
                          fallback=GA_DEFAULTS["pool_size"]))

    src = RandomSource(seed)
    pool = tuple(
        generate_deterministic_instance(
            n_users, bounds, weight_range, schedule,
            src.generator(1_000_000 + i),
            float(weight_step) if weight_step is not None else None,
        )
        for i in range(pool_size)
    )
    config = GaConfig(
        bounds=bounds,
        training_pool=pool,
        population_size=int(_pick(args, "population", None, fallback=GA_DEFAULTS["population"])),
        generations=int(_pick(args, "generations", None, fallback=GA_DEFAULTS["generations"])),
        crossover_rate=float(_pick(args, "crossover_rate", None, fallback=GA_DEFAULTS["crossover_rate"])),
        mutation_rate=float(_pick(args, "mutation_rate", None, fallback=GA_DEFAULTS["mutation_rate"])),
        mutation_scale=float(_pick(args, "mutation_scale", None, fallback=GA_DEFAULTS["mutation_scale"])),
        elitism_count=int(_pick(args, "elitism", None, fallback=GA_DEFAULTS["elitism"])),
        tournament_size=int(_pick(args, "tournament", None, fallback=GA_DEFAULTS["tournament"])),
        offline_scale=scale,
        seed=seed,
    )
    result = evolve(config)
    doc = {
        "bounds": {"lower": bounds.lower, "upper": bounds.upper},
        "thresholds": [float(t) for t in result.best.thresholds],
        "fitness": result.best_fitness,
        "history": result.history,
    }
    _emit(doc, args.out)
    print(f"best_fitness={result.best_fitness:.6f} generations={config.generations}",
          file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser plumbing
# ---------------------------------------------------------------------------

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file with option values (flags win)")
    sub.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    sub.add_argument("--out", default=None, help="output path ('-' or omit for stdout)")


def _add_instance_params(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--users", "--n", type=int, default=None, dest="users")
    sub.add_argument("--bounds", default=None,
                     help="efficiency bounds as L,U (same as --eff-low/--eff-high)")
    sub.add_argument("--eff-low", type=float, default=None)
    sub.add_argument("--eff-high", type=float, default=None)
    sub.add_argument("--weight-low", type=float, default=None)
    sub.add_argument("--weight-high", type=float, default=None)
    sub.add_argument("--weight-step", type=float, default=None)
    sub.add_argument("--schedule", default=None,
                     help="arrivals as slot:amount,slot:amount,...")


def _add_model_params(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--types", default=None,
                     help="stochastic types as value:weight:prob,...")
    sub.add_argument("--q", type=float, default=None, help="harvest probability")
    sub.add_argument("--slots", type=int, default=None)
    sub.add_argument("--energy-cap", type=int, default=None)
    sub.add_argument("--future-slots-only", action="store_true",
                     help="expected-threshold counts only slots after the current one")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="admitsim",
        description="Admission policies for an energy-harvesting service point.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    g = subs.add_parser("generate", help="write an instance JSON")
    g.add_argument("--preset", default=None,
                   help="table1/table2 (deterministic) or fig4..fig7 (one sampled episode)")
    g.add_argument("--trial", type=int, default=None,
                   help="trial index for the derived random stream (default 0)")
    g.add_argument("--capacity", type=float, default=None,
                   help="total harvested energy; use with --harvests as a "
                        "shorthand for an evenly split --schedule")
    g.add_argument("--harvests", type=int, default=None,
                   help="number of equal harvests the --capacity is split into")
    _add_instance_params(g)
    _add_common(g)
    g.set_defaults(func=cmd_generate)

    o = subs.add_parser("offline-opt", help="exact offline optimum of an instance")
    o.add_argument("--instance", required=True)
    o.add_argument("--scale", type=int, default=None,
                   help="energy units per weight unit (default 1)")
    o.add_argument("--show-selection", action="store_true")
    _add_common(o)
    o.set_defaults(func=cmd_offline_opt)

    d = subs.add_parser("dp-solve", help="value table, thresholds and checks")
    d.add_argument("--preset", default=None, help="fig4..fig7")
    _add_model_params(d)
    d.add_argument("--initial-energy", type=int, default=None)
    d.add_argument("--checks", action="store_true",
                   help="run and print structural diagnostics")
    d.add_argument("--verify", action="store_true",
                   help="cross-check the expected value against an exhaustive "
                        "scenario-tree oracle (small models only)")
    _add_common(d)
    d.set_defaults(func=cmd_dp_solve)

    s = subs.add_parser("simulate", help="run one policy over an instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--policy", required=True, help=", ".join(POLICY_NAMES))
    s.add_argument("--preset", default=None, help="fig preset supplying the model")
    _add_model_params(s)
    s.add_argument("--bounds", default=None,
                   help="efficiency bounds as L,U (same as --eff-low/--eff-high)")
    s.add_argument("--eff-low", type=float, default=None)
    s.add_argument("--eff-high", type=float, default=None)
    s.add_argument("--best-efficiency", type=float, default=None)
    s.add_argument("--ga-chromosome", default=None)
    s.add_argument("--fuzzy-system", default=None)
    s.add_argument("--trace", action="store_true", help="include per-slot steps")
    _add_common(s)
    s.set_defaults(func=cmd_simulate)

    c = subs.add_parser("compare", help="Monte Carlo policy comparison")
    c.add_argument("--preset", default=None,
                   help="table1, table2, fig4, fig5, fig6 or fig7")
    c.add_argument("--trials", type=int, default=None)
    c.add_argument("--episodes", type=int, default=None)
    c.add_argument("--threads", type=int, default=None)
    c.add_argument("--out-dir", default=None, help="where report files go (default .)")
    c.add_argument("--ga-chromosome", default=None,
                   help="reuse a trained chromosome instead of training")
    c.add_argument("--pool-size", type=int, default=None)
    c.add_argument("--policies", default=None, help="comma-separated policy names")
    c.add_argument("--scale", type=int, default=None)
    c.add_argument("--future-slots-only", action="store_true")
    _add_instance_params(c)
    _add_common(c)
    c.set_defaults(func=cmd_compare)

    t = subs.add_parser("ga-train", help="evolve a bucket-threshold chromosome")
    t.add_argument("--preset", default=None, help="table1/table2 for the pool")
    _add_instance_params(t)
    t.add_argument("--scale", type=int, default=None)
    t.add_argument("--pool-size", type=int, default=None)
    t.add_argument("--population", type=int, default=None)
    t.add_argument("--generations", type=int, default=None)
    t.add_argument("--crossover-rate", type=float, default=None)
    t.add_argument("--mutation-rate", type=float, default=None)
    t.add_argument("--mutation-scale", type=float, default=None)
    t.add_argument("--elitism", type=int, default=None)
    t.add_argument("--tournament", type=int, default=None)
    _add_common(t)
    t.set_defaults(func=cmd_ga_train)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    sub = None
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            sub = action.choices[args.command]
            break
    try:
        if sub is not None:
            _apply_config(args, sub)
        if getattr(args, "bounds", None):
            try:
                lo_s, hi_s = str(args.bounds).split(",")
                lo, hi = float(lo_s), float(hi_s)
            except ValueError:
                raise ParameterError(
                    f"bad --bounds {args.bounds!r}; expected L,U"
                ) from None
            if args.eff_low is None:
                args.eff_low = lo
            if args.eff_high is None:
                args.eff_high = hi
        return args.func(args)
    except ParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ResourceError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
