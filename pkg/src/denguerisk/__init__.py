"""Non-Markovian Aedes life-cycle and dengue transmission models.

Submodules:
    phasetype     Erlang and general phase-type stage durations.
    forcing       Climate series, temperature rate tables, capacity regression.
    lifecycle     Stage-structured mosquito model, integrator, quadrature oracle.
    transmission  Coupled vector-host dengue model and R0.
    estimation    Particle filter, capacity regression, bite and trap fits.
    risk          Logistic outbreak-risk classifier.
    pipeline      Gridded daily risk rasters.
    cli           ``denguerisk`` command-line entry point.
"""

from . import estimation, forcing, lifecycle, phasetype, pipeline, risk, transmission
from .errors import (ClimateFormatError, DegenerateFilterError, IntegrationError,
                     ModelInvalidError, ParameterInfeasibleError, RateTableError)
from .forcing import CapacityModel, ClimateSeries, RateSet, default_rates, load_climate
from .lifecycle import LifecycleParams, LifecycleState, basic_offspring_number, simulate
from .pipeline import PipelineConfig, run_cell, run_grid
from .risk import RiskModel, predict
from .transmission import EpiParams, TransmissionState, reproduction_number, simulate_epi

__version__ = "0.1.0"

__all__ = [
    "phasetype", "forcing", "lifecycle", "transmission", "estimation", "risk", "pipeline",
    "ClimateFormatError", "DegenerateFilterError", "IntegrationError", "ModelInvalidError",
    "ParameterInfeasibleError", "RateTableError",
    "CapacityModel", "ClimateSeries", "RateSet", "default_rates", "load_climate",
    "LifecycleParams", "LifecycleState", "basic_offspring_number", "simulate",
    "EpiParams", "TransmissionState", "reproduction_number", "simulate_epi",
    "RiskModel", "predict",
    "PipelineConfig", "run_cell", "run_grid",
    "__version__",
]
