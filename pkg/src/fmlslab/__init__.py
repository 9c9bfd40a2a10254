"""Pricing laboratory for put options under a maximally skewed stable law.

The model replaces the Brownian driver of Black-Scholes with a spectrally
negative alpha-stable motion (tail index alpha in (1, 2]), which keeps
exponential moments finite and reproduces Black-Scholes exactly at
alpha = 2.  The package prices European, Bermudan, and American puts,
extracts early-exercise boundaries, checks the pricing PDE residual, and
cross-validates everything by Monte Carlo.
"""

from .config import RunConfig, load_json_config, resolve_config
from .density import DensityTable, GridSpec, build_table, density, get_table
from .errors import (
    ConfigurationError,
    ContractSupportError,
    ConvergenceError,
    DomainError,
    NumericalAccuracyError,
    PricingError,
)
from .european import (
    ExpAffine,
    GridContract,
    StepKernel,
    bs_put_reference,
    price_put,
    propagate,
)
from .exercise import (
    ExerciseBoundary,
    ExerciseGrid,
    PastingReport,
    ValueSurface,
    american_price,
    bermudan_surface,
    dump_boundary_csv,
    extract_boundary,
    richardson_limit,
    smooth_pasting_report,
)
from .fractional import (
    FracGrid,
    apply_frac_derivative,
    dump_residual_csv,
    european_residual,
    fpde_residual,
    gl_weights,
)
from .mc import (
    MCConfig,
    MCEstimate,
    MartingaleReport,
    martingale_check,
    mc_european_put,
    sample_stable,
)
from .model import (
    ModelParams,
    OptionSpec,
    ReducedCoords,
    convexity_adjustment,
    drift_adjustment,
    nu_matched_sigma,
    payoff_put,
    to_reduced,
)
from .reports import (
    PropertyReport,
    bermudan_convergence_table,
    binomial_american_put,
    mc_agreement_report,
    residual_report,
    scan_alpha,
    scan_convexity,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractSupportError",
    "ConvergenceError",
    "DensityTable",
    "DomainError",
    "ExerciseBoundary",
    "ExerciseGrid",
    "ExpAffine",
    "FracGrid",
    "GridContract",
    "GridSpec",
    "MCConfig",
    "MCEstimate",
    "MartingaleReport",
    "ModelParams",
    "NumericalAccuracyError",
    "OptionSpec",
    "PastingReport",
    "PricingError",
    "PropertyReport",
    "ReducedCoords",
    "RunConfig",
    "StepKernel",
    "ValueSurface",
    "american_price",
    "apply_frac_derivative",
    "bermudan_convergence_table",
    "bermudan_surface",
    "binomial_american_put",
    "bs_put_reference",
    "build_table",
    "convexity_adjustment",
    "density",
    "drift_adjustment",
    "dump_boundary_csv",
    "dump_residual_csv",
    "european_residual",
    "extract_boundary",
    "fpde_residual",
    "get_table",
    "gl_weights",
    "load_json_config",
    "martingale_check",
    "mc_agreement_report",
    "mc_european_put",
    "nu_matched_sigma",
    "price_put",
    "propagate",
    "payoff_put",
    "resolve_config",
    "residual_report",
    "richardson_limit",
    "sample_stable",
    "scan_alpha",
    "scan_convexity",
    "smooth_pasting_report",
    "to_reduced",
    "__version__",
]
