"""Calibration: particle filter, capacity and bite regressions, trap scaling."""

from .bites import IGFit, fit_bites_ig
from .capacity import (CapacityPosterior, ConvergenceWarning, bin_means, fit_capacity_ig, ig_logpdf,
                       ig_pdf, split_rhat)
from .particle import (CaseSeries, Ensemble, FilterModel, FilterResult, Generation, Particle,
                       ProposalConfig, SmoothingResult, effective_sample_size, initial_ensemble,
                       load_case_series, observation_likelihood, pf_smooth, pf_step, propose,
                       run_filter, simulate_cases, systematic_resample, write_case_series,
                       write_posterior_csv)
from .traps import TrapFit, fit_trap_scaling, fit_trap_sites

__all__ = [
    "IGFit", "fit_bites_ig",
    "CapacityPosterior", "ConvergenceWarning", "bin_means", "fit_capacity_ig", "ig_logpdf",
    "ig_pdf", "split_rhat",
    "CaseSeries", "Ensemble", "FilterModel", "FilterResult", "Generation", "Particle",
    "ProposalConfig", "SmoothingResult", "effective_sample_size", "initial_ensemble",
    "load_case_series", "observation_likelihood", "pf_smooth", "pf_step", "propose",
    "run_filter", "simulate_cases", "systematic_resample", "write_case_series",
    "write_posterior_csv",
    "TrapFit", "fit_trap_scaling", "fit_trap_sites",
]
