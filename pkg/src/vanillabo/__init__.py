"""Vanilla Bayesian optimisation with dimension-scaled lengthscale priors."""

__version__ = "0.1.0"

from .acquisition import AcqConfig, ei, log_ei, optimize_acquisition
from .benchmarks import EmbeddedBenchmark, evaluate_noisy, evaluate_true, make_embedded
from .bo import BOConfig, Problem, RunHistory, incumbent, run, simple_regret, sobol_search
from .complexity import (
    ModelClassSpec,
    Variant,
    build_model_class,
    greedy_mig,
    information_gain,
    sobol_mig,
)
from .exceptions import (
    AcquisitionError,
    ConfigError,
    ContractViolation,
    FitError,
    NumericalError,
    RunError,
)
from .fit import FitConfig, Gamma, HyperpriorSpec, LogNormal, ScaledLogNormal, fit
from .geometry import dei_drho, ei_of_rho, locality_report, rho_lower_bound, rho_star_numeric
from .gp import Dataset, GPModel, Hyperparameters, KernelFamily, KernelSpec
from .sampling import doe_size, sobol

__all__ = [
    "AcqConfig", "AcquisitionError", "BOConfig", "ConfigError", "ContractViolation", "Dataset",
    "EmbeddedBenchmark", "FitConfig", "FitError", "GPModel", "Gamma", "HyperpriorSpec",
    "Hyperparameters", "KernelFamily", "KernelSpec", "LogNormal", "ModelClassSpec",
    "NumericalError", "Problem", "RunError", "RunHistory", "ScaledLogNormal", "Variant",
    "build_model_class", "dei_drho", "doe_size", "ei", "ei_of_rho", "evaluate_noisy",
    "evaluate_true", "fit", "greedy_mig", "incumbent", "information_gain", "locality_report",
    "log_ei", "make_embedded", "optimize_acquisition", "rho_lower_bound", "rho_star_numeric",
    "run", "simple_regret", "sobol", "sobol_mig", "sobol_search",
]
