"""Spectral-Galerkin laboratory for the stochastic Cahn-Hilliard equation
with logarithmic free energy: couplings, Harnack checks, Gibbs sampling."""
from .dynamics import (
    CoupledPath,
    GammaSchedule,
    ModelParams,
    couple_degenerate,
    couple_white,
    simulate_ensemble,
)
from .errors import (
    DivergenceError,
    DomainError,
    EstimatorError,
    NumericsError,
    SamplerWarning,
    ScheduleError,
    ShapeError,
    SpinodalError,
    StabilityError,
    ValidationError,
    VariantError,
)
from .gibbs import GibbsTarget, compare_invariant, run_pcn
from .harnack import CheckReport, TestFunctional
from .noise import NoiseSpec, alpha_rate
from .potential import PotentialParams
from .spectral import GridField, SpectralField, analyze, norm_gamma, seminorm, synthesize

__version__ = "0.1.0"

__all__ = [
    "CoupledPath", "GammaSchedule", "ModelParams", "NoiseSpec", "PotentialParams",
    "simulate_ensemble", "couple_degenerate", "couple_white", "alpha_rate",
    "TestFunctional", "CheckReport", "GibbsTarget", "compare_invariant", "run_pcn",
    "SpectralField", "GridField", "analyze", "synthesize", "seminorm", "norm_gamma",
    "SpinodalError", "ShapeError", "NumericsError", "DomainError", "VariantError",
    "ValidationError", "StabilityError", "DivergenceError", "ScheduleError",
    "EstimatorError", "SamplerWarning",
]
