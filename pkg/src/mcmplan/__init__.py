"""Minimum-time mine-countermeasure search planning for AUVs with a forward-looking sonar."""
from .dynamics import ControlSchedule, Trajectory, VehicleParams, VehicleState, rollout
from .optimize import (
    InfeasibleBracket,
    OptimizationConfig,
    OptimizationError,
    PlanResult,
    evaluate_fixed_plan,
    inner_minimize_risk,
    outer_min_time,
)
from .risk import CoverageGrid, Domain, RiskReport, TargetSample, coverage_grid, residual_risk, sample_targets
from .scenario import Scenario, ScenarioError, format_scenario, parse_scenario
from .seabed import RippleField, dom_weight, effective_gamma
from .sensor import SensorParams, Target, gamma_rate

__version__ = "0.1.0"

__all__ = [
    "ControlSchedule", "CoverageGrid", "Domain", "InfeasibleBracket", "OptimizationConfig",
    "OptimizationError", "PlanResult", "RippleField", "RiskReport", "Scenario", "ScenarioError",
    "SensorParams", "Target", "TargetSample", "Trajectory", "VehicleParams", "VehicleState",
    "coverage_grid", "dom_weight", "effective_gamma", "evaluate_fixed_plan", "format_scenario",
    "gamma_rate", "inner_minimize_risk", "outer_min_time", "parse_scenario", "residual_risk",
    "rollout", "sample_targets",
]
