"""Stochastic activator-inhibitor dynamics on a ring, with diffusivity inference.

The package simulates a two-species reaction-diffusion system driven by
space-time white noise on a periodic 1D domain, mimics microscopy-style
local observations of the activator field, and estimates the activator
diffusion coefficient from those observations together with confidence
intervals.  Monte Carlo experiment drivers and a small CLI sit on top.
"""

from meinhardt.domain import TorusGrid, integrate, periodic_distance, wrap_index
from meinhardt.model import (
    FieldPair,
    ModelParams,
    default_initial_condition,
    default_params,
)
from meinhardt.solver import Scheme, SolverConfig, Trajectory, simulate
from meinhardt.measurement import (
    Kernel,
    MeasurementLayout,
    MeasurementSet,
    bump_kernel,
    measure_trajectory,
)
from meinhardt.estimator import EstimateReport, augmented_mle, confidence_intervals
from meinhardt.experiments import (
    CampaignResult,
    ChannelPolicy,
    McCampaign,
    RepolStats,
    Scenario,
    count_fronts,
    estimation_campaign,
    relative_concentrations,
    repol_sweep,
    time_to_repolarisation,
)

__all__ = [
    "TorusGrid",
    "integrate",
    "periodic_distance",
    "wrap_index",
    "FieldPair",
    "ModelParams",
    "default_initial_condition",
    "default_params",
    "Scheme",
    "SolverConfig",
    "Trajectory",
    "simulate",
    "Kernel",
    "MeasurementLayout",
    "MeasurementSet",
    "bump_kernel",
    "measure_trajectory",
    "EstimateReport",
    "augmented_mle",
    "confidence_intervals",
    "CampaignResult",
    "ChannelPolicy",
    "McCampaign",
    "RepolStats",
    "Scenario",
    "count_fronts",
    "estimation_campaign",
    "relative_concentrations",
    "repol_sweep",
    "time_to_repolarisation",
]

__version__ = "0.1.0"
