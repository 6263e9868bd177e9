"""Artificial-compressibility Navier-Stokes: kernels, spectral solver and long-time asymptotics."""

__version__ = "0.1.0"

from ._validation import (
    ConfigurationError,
    DomainError,
    GridMismatchError,
    QuadratureError,
    SolverDivergenceError,
    TemamError,
)
from .asymptotics import (
    DecayExponentRegressor,
    DecayFit,
    LambdaEstimate,
    ProfileReport,
    decay_fit,
    lambda_from_duhamel,
    lambda_from_mean,
    mean_series,
    profile_residual,
    verify_linear_profile,
)
from .kernels import apply_heat, apply_m_epsilon, helmholtz, leray_project, m_epsilon_symbol, materialize_kernel
from .solver import (
    NavierStokesSolver,
    SimConfig,
    TemamSolver,
    Trajectory,
    energy_ledger,
    ns_reference_run,
    picard_terms,
    run,
    step,
)
from .spectral import Grid, ScalarField, SpectralVectorField, from_spectral, lq_norm, make_grid, to_spectral

__all__ = [
    "__version__",
    "TemamError",
    "ConfigurationError",
    "DomainError",
    "GridMismatchError",
    "QuadratureError",
    "SolverDivergenceError",
    "Grid",
    "ScalarField",
    "SpectralVectorField",
    "make_grid",
    "to_spectral",
    "from_spectral",
    "lq_norm",
    "m_epsilon_symbol",
    "apply_m_epsilon",
    "apply_heat",
    "helmholtz",
    "leray_project",
    "materialize_kernel",
    "SimConfig",
    "Trajectory",
    "step",
    "run",
    "ns_reference_run",
    "picard_terms",
    "energy_ledger",
    "TemamSolver",
    "NavierStokesSolver",
    "LambdaEstimate",
    "DecayFit",
    "DecayExponentRegressor",
    "ProfileReport",
    "mean_series",
    "lambda_from_mean",
    "lambda_from_duhamel",
    "decay_fit",
    "profile_residual",
    "verify_linear_profile",
]
