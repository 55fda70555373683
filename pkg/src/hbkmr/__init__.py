"""Bayesian kernel machine regression with heteroscedastic errors.

Fits ``y_i = h(z_i) + x_i' beta + eps_i`` where h gets a Gaussian-process
prior over a kernel of the exposure mixture and the log error variance is a
linear function of chosen drivers. The surface is integrated out
analytically, a Metropolis-within-Gibbs chain samples the remaining
parameters, and exposure-response summaries, predictions, residual
diagnostics, and WAIC comparisons come from closed-form conditionals over
the retained draws.
"""

from .data import (
    DataError,
    Dataset,
    ExposureTransform,
    VarianceDesign,
    apply_exposure_transforms,
    build_variance_design,
    load_csv,
    quantile,
    standardize_exposures,
)
from .diagnostics import (
    AssociationRow,
    ResidualReport,
    WaicResult,
    bayesian_residuals,
    compare,
    linear_approx_residuals,
    waic,
)
from .inference import (
    ConditionalSummary,
    EffectEstimate,
    Z95,
    conditional_moments,
    h_conditional,
    joint_effect,
    joint_effect_table,
    predict,
    single_variable_effects,
    univariate_curve,
)
from .kernel import (
    CovFactor,
    FactorizationError,
    KernelMatrix,
    factor_cov,
    kernel_entry,
    kernel_matrix,
)
from .model import (
    ParamState,
    PriorSpec,
    log_marginal_likelihood,
    log_posterior,
    log_prior,
    s_diag,
)
from .sampler import (
    McmcConfig,
    PosteriorSamples,
    ess,
    fit,
    gibbs_beta,
    initialize,
)
from .simulate import (
    EXAMPLE_EXPOSURE_QUANTILES,
    CovariateSpec,
    SimConfig,
    SimTruth,
    generate,
    recovery_report,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "DataError",
    "Dataset",
    "ExposureTransform",
    "VarianceDesign",
    "apply_exposure_transforms",
    "build_variance_design",
    "load_csv",
    "quantile",
    "standardize_exposures",
    "AssociationRow",
    "ResidualReport",
    "WaicResult",
    "bayesian_residuals",
    "compare",
    "linear_approx_residuals",
    "waic",
    "ConditionalSummary",
    "EffectEstimate",
    "Z95",
    "conditional_moments",
    "h_conditional",
    "joint_effect",
    "joint_effect_table",
    "predict",
    "single_variable_effects",
    "univariate_curve",
    "CovFactor",
    "FactorizationError",
    "KernelMatrix",
    "factor_cov",
    "kernel_entry",
    "kernel_matrix",
    "ParamState",
    "PriorSpec",
    "log_marginal_likelihood",
    "log_posterior",
    "log_prior",
    "s_diag",
    "McmcConfig",
    "PosteriorSamples",
    "ess",
    "fit",
    "gibbs_beta",
    "initialize",
    "EXAMPLE_EXPOSURE_QUANTILES",
    "CovariateSpec",
    "SimConfig",
    "SimTruth",
    "generate",
    "recovery_report",
]
