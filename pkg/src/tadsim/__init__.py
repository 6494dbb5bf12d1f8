"""Discrete-event simulation of TAD-MAC and two baseline duty-cycled MACs."""

from .adaptive import (
    AdaptParams,
    HalfStats,
    IntervalState,
    TsrBank,
    TsrRegister,
    error_term,
    half_stats,
    next_interval,
    push,
    update_factor,
    weighted_value,
)
from .energy import EnergyLedger, PowerProfile, total_energy
from .errors import ConfigError, SimulationFault
from .harness import ConvergenceCriterion, ExperimentReport, detect_convergence, export_report, run_experiment
from .kernels import BACKEND as KERNEL_BACKEND
from .scenario import Scenario, load_scenario, star_scenario

__version__ = "0.1.0"
