"""Simulation and gradient estimation for pricing experiments on a congested single-server queue."""
from .errors import ConfigError, CongestionLabError, DataError
from .gradient import asymptotic_variance, policy_gradient
from .harness import ExperimentConfig, run_mc, run_nonstationary_study, run_scenario_gallery
from .model import RateModel, scenario_preset, steady_state
from .sim import (
    FixedPrice, IntervalSwitchback, RegenerativeSwitchback, UserLevel, EventLog, build_ed_trace, simulate,
)

__all__ = [
    "ConfigError", "CongestionLabError", "DataError", "asymptotic_variance", "policy_gradient",
    "ExperimentConfig", "run_mc", "run_nonstationary_study", "run_scenario_gallery", "RateModel",
    "scenario_preset", "steady_state", "FixedPrice", "IntervalSwitchback", "RegenerativeSwitchback",
    "UserLevel", "EventLog", "build_ed_trace", "simulate",
]
