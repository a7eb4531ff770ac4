"""Efficient estimation of linear functionals in inverse regression ``Y = (K f)(X) + eps``."""

from .estimators import (
    FunctionalSpec,
    Representer,
    efficient_functional,
    gamma_representer,
    naive_coefficient,
    one_step_coefficient,
    one_step_path,
    optimal_variance_coefficient,
    plugin_asymptotic_variance,
    series_estimate,
    truncation_schedule,
)
from .exceptions import ConfigError, ModelError, SummabilityRefusal, ValidationFailure
from .experiment import ExperimentConfig, ExperimentResult, compare_to_bound, normality_diagnostic, run_monte_carlo
from .noise import ErrorModel, gaussian_error, logistic_error, sample_errors, validate_error_model
from .operators import (
    InputFunction,
    SpectralOperator,
    brownian_bridge_operator,
    forward_apply,
    greens_quadrature_oracle,
    identity_operator,
    make_input_power_decay,
)
from .simulate import Dataset, generate_dataset

__version__ = "0.1.0"
