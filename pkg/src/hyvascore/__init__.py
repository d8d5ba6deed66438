"""Hyvarinen-score inference, model selection and density estimation for improper models."""

__version__ = "0.1.0"

from .score import (  # noqa: E402
    OracleFailure,
    QuadratureFailure,
    QuadratureGrid,
    YDerivatives,
    fd_hscore,
    fd_y_derivatives,
    fisher_divergence,
    hscore_from_derivatives,
    hscore_multivariate,
    total_hscore,
)
from .models import (  # noqa: E402
    DataSet,
    GaussianRegression,
    InfeasibleParameters,
    TemperedKDE,
    TsallisGaussianRegression,
    TukeyRegression,
)
from .priors import NlpSpec, PriorSpec, gaussian_prior, kde_prior, log_prior, tukey_prior  # noqa: E402
from .inference import FitResult, fit_general_bayes, fit_hposterior  # noqa: E402
from .selection import (  # noqa: E402
    ComparisonReport,
    bic_type_score,
    compare_models,
    hbayes_factor,
    laplace_log_evidence,
    nlp_adjusted_log_bf,
    posterior_model_probs,
    smic,
)

__all__ = [name for name in dir() if not name.startswith("_")]
