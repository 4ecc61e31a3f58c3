"""Dynamic pricing and demand learning under stochastic Bass diffusion."""
from .core import AdoptionState, MarketParams, ParameterError, adoption_potential, arrival_rate
from .fluid import (FluidSegment, FluidTrajectory, det_value, disadvantage, final_adoption,
                    fluid_simulate, lipschitz_bounds, optimal_policy_price, optimal_price_curve,
                    price_upper_bound, segment_advance, segment_time)
from .simulate import History, PolicyFault, SimTrace, pseudo_regret, simulate
from .policies import (Algorithm1Policy, EstimatorState, OraclePolicy, PolicyConfig,
                       baseline_policies, estimate_alpha, estimate_beta, lcb_price, make_policy)
from .experiments import (ExperimentReport, TwoMarketInstance, coverage_experiment,
                          distinguishability_experiment, kl_exponential, price_gap_experiment,
                          regret_sweep, stoch_value_dp)
from .config import ConfigError, RunConfig, config_load

__version__ = "0.1.0"

__all__ = [
    "AdoptionState",
    "MarketParams",
    "ParameterError",
    "adoption_potential",
    "arrival_rate",
    "FluidSegment",
    "FluidTrajectory",
    "det_value",
    "disadvantage",
    "final_adoption",
    "fluid_simulate",
    "lipschitz_bounds",
    "optimal_policy_price",
    "optimal_price_curve",
    "price_upper_bound",
    "segment_advance",
    "segment_time",
    "History",
    "PolicyFault",
    "SimTrace",
    "pseudo_regret",
    "simulate",
    "Algorithm1Policy",
    "EstimatorState",
    "OraclePolicy",
    "PolicyConfig",
    "baseline_policies",
    "estimate_alpha",
    "estimate_beta",
    "lcb_price",
    "make_policy",
    "ExperimentReport",
    "TwoMarketInstance",
    "coverage_experiment",
    "distinguishability_experiment",
    "kl_exponential",
    "price_gap_experiment",
    "regret_sweep",
    "stoch_value_dp",
    "ConfigError",
    "RunConfig",
    "config_load",
]
