"""Admission control for an energy-harvesting service point.

Exact offline and stochastic solvers, online threshold policies (closed
form, genetic, fuzzy) and a reproducible Monte Carlo evaluation harness.
"""

from .errors import ParameterError, ResourceError
from .instances import (
    EfficiencyBounds,
    EnergyArrivalSchedule,
    EpisodeInstance,
    RandomSource,
    StochasticEnergyModel,
    UserDemand,
    UserType,
    generate_deterministic_instance,
    sample_stochastic_episode,
)
from .offline import OfflineSolution, brute_force_offline, offline_value, solve_offline
from .dp import (
    DpConfig,
    PropertyReport,
    ThresholdTable,
    ValueTable,
    build_value_table,
    check_supermodularity,
    exhaustive_policy_oracle,
    extract_thresholds,
    run_structure_checks,
)
from .policies import (
    POLICY_NAMES,
    ConservativePolicy,
    DecisionTrace,
    GreedyPolicy,
    PolicyState,
    expected_threshold,
    run_policy_trace,
    run_stochastic_trace,
)
from .thresholds import (
    JumpingThresholdPolicy,
    MonotoneThresholdPolicy,
    competitive_bound,
    psi,
)
from .ga import Chromosome, GaConfig, GaResult, evolve
from .fuzzy import (
    FuzzySystem,
    FuzzyThresholdPolicy,
    TrapezoidMf,
    default_fuzzy_system,
    infer_threshold,
    load_fuzzy_system,
)
from .evaluation import (
    CampaignConfig,
    PolicySpec,
    run_campaign,
    stochastic_comparison,
    two_type_upper_bound,
)

__version__ = "0.1.0"

__all__ = [
    "ParameterError", "ResourceError",
    "EfficiencyBounds", "EnergyArrivalSchedule", "EpisodeInstance",
    "RandomSource", "StochasticEnergyModel", "UserDemand", "UserType",
    "generate_deterministic_instance", "sample_stochastic_episode",
    "OfflineSolution", "brute_force_offline", "offline_value", "solve_offline",
    "DpConfig", "PropertyReport", "ThresholdTable", "ValueTable",
    "build_value_table", "check_supermodularity", "exhaustive_policy_oracle",
    "extract_thresholds", "run_structure_checks",
    "POLICY_NAMES", "ConservativePolicy", "DecisionTrace", "GreedyPolicy",
    "PolicyState", "expected_threshold", "run_policy_trace", "run_stochastic_trace",
    "JumpingThresholdPolicy", "MonotoneThresholdPolicy", "competitive_bound", "psi",
    "Chromosome", "GaConfig", "GaResult", "evolve",
    "FuzzySystem", "FuzzyThresholdPolicy", "TrapezoidMf", "default_fuzzy_system",
    "infer_threshold", "load_fuzzy_system",
    "CampaignConfig", "PolicySpec", "run_campaign", "stochastic_comparison",
    "two_type_upper_bound",
]
