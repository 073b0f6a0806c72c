"""Bayesian fixed-budget best-arm identification for selecting epidemic
mitigation strategies with a stochastic simulator."""

from .bandits import (
    BayesGapConfig,
    BudgetedRun,
    Environment,
    RawOutcome,
    Recommendation,
    censored_pull,
    reward_of,
    run_bayesgap,
    run_successive_rejects,
    run_ttts,
    run_uniform,
)
from .confidence import PosteriorSet, bin_success_calibration, clopper_pearson, probability_of_success
from .episim import (
    Scenario,
    SimulationResult,
    VaccineStrategy,
    default_scenario,
    enumerate_strategies,
    make_environment,
    make_synthetic_environment,
    simulate,
)
from .fadeout import OffspringModel, extinction_probability, fade_out_threshold, pgf
from .stats import ArmStatistics, TPosterior, posterior_from_stats, update_statistics

__version__ = "0.1.0"
