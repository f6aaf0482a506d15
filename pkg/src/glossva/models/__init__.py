from .gaussian import (
    LinearGaussianData,
    conjugate_posterior,
    exact_variational_params,
    linear_gaussian_model,
    scalar_target_model,
    simulate_linear_gaussian,
)
from .io import export_csv, load_csv
from .logistic import LongitudinalBinaryData, logistic_mixed_model, simulate_logistic
from .mmnl import PanelChoiceData, mmnl_model, simulate_mmnl
from .poisson import LongitudinalCountData, poisson_mixed_model, simulate_poisson

__all__ = [
    "LinearGaussianData",
    "LongitudinalBinaryData",
    "LongitudinalCountData",
    "PanelChoiceData",
    "conjugate_posterior",
    "exact_variational_params",
    "export_csv",
    "linear_gaussian_model",
    "load_csv",
    "logistic_mixed_model",
    "mmnl_model",
    "poisson_mixed_model",
    "scalar_target_model",
    "simulate_linear_gaussian",
    "simulate_logistic",
    "simulate_mmnl",
    "simulate_poisson",
]
