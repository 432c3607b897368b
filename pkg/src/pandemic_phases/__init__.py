"""Two-group SEIDR epidemic model with CUSUM-based phase detection."""

from __future__ import annotations

__version__ = "0.1.0"

from .changepoint import (
    CusumParams,
    CusumState,
    Detection,
    cusum_step,
    detect_backward,
    detect_forward,
    estimate_baseline,
    two_way_estimate,
)
from .errors import DomainError, FitError, InsufficientDataError, IntegrationError, ParseError
from .fitting import (
    FitConfig,
    FitResult,
    InitialStateSpec,
    ParamBounds,
    build_initial_state,
    fit_parameters,
    objective_mse,
    validate,
    vertical_adjustment,
)
from .ingest import country_series, parse_csse_csv
from .model import (
    IntegratorConfig,
    ModelParams,
    SeidrState,
    Trajectory,
    derivative,
    integrate_forward,
    integrate_reverse,
    reproduction_rate,
    total_population,
)
from .pipeline import DynamicConfig, Phase, PhaseTimeline, dynamic_phase_detection, residual_stream
from .report import emit_report
from .scenario import ScenarioSet, scenario_projection
from .series import ObservedSeries, monotone_repair
from .synthetic import SyntheticSpec, generate_synthetic

__all__ = [
    "CusumParams",
    "CusumState",
    "Detection",
    "DomainError",
    "DynamicConfig",
    "FitConfig",
    "FitError",
    "FitResult",
    "InitialStateSpec",
    "InsufficientDataError",
    "IntegrationError",
    "IntegratorConfig",
    "ModelParams",
    "ObservedSeries",
    "ParamBounds",
    "ParseError",
    "Phase",
    "PhaseTimeline",
    "ScenarioSet",
    "SeidrState",
    "SyntheticSpec",
    "Trajectory",
    "build_initial_state",
    "country_series",
    "cusum_step",
    "derivative",
    "detect_backward",
    "detect_forward",
    "dynamic_phase_detection",
    "emit_report",
    "estimate_baseline",
    "fit_parameters",
    "generate_synthetic",
    "integrate_forward",
    "integrate_reverse",
    "monotone_repair",
    "objective_mse",
    "parse_csse_csv",
    "reproduction_rate",
    "residual_stream",
    "scenario_projection",
    "total_population",
    "two_way_estimate",
    "validate",
    "vertical_adjustment",
]
