"""Structured variational inference for two-level hierarchical models.

The variational family is a conditionally structured Gaussian with a
sparse precision Cholesky factor, optionally sharpened by local and
global skew-symmetric corrections that add no free parameters.  The
package bundles an ELBO estimator with the reflection uniforms
integrated out analytically, a scalar reverse-mode autodiff tape, an
Adam trainer, benchmark hierarchical models, an adaptive random-walk
Metropolis oracle, draw-comparison diagnostics, and a TOML-driven CLI.
"""

__version__ = "0.1.0"

from .elbo import ElboSample, elbo_estimate, elbo_gradient, elbo_marginalized
from .family import (
    LADDER,
    VARIANTS,
    Draw,
    VariationalParams,
    Variant,
    load_params,
    log_q,
    posthoc_wrap,
    sample,
    sample_matrix,
    save_params,
    variant_by_name,
    variant_name,
)
from .mcmc import ChainOutput, McmcConfig, run_mcmc, summarize
from .model import HierarchicalModel, ModelSignature
from .train import FitResult, TrainConfig, fit, run_ladder

__all__ = [
    "ChainOutput",
    "Draw",
    "ElboSample",
    "FitResult",
    "HierarchicalModel",
    "LADDER",
    "McmcConfig",
    "ModelSignature",
    "TrainConfig",
    "VARIANTS",
    "VariationalParams",
    "Variant",
    "__version__",
    "elbo_estimate",
    "elbo_gradient",
    "elbo_marginalized",
    "fit",
    "load_params",
    "log_q",
    "posthoc_wrap",
    "run_ladder",
    "run_mcmc",
    "sample",
    "sample_matrix",
    "save_params",
    "summarize",
    "variant_by_name",
    "variant_name",
]
