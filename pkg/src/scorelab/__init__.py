"""scorelab: proper scoring rules for probabilistic forecasts.

Score evaluation across forecast representations, minimum-score parameter
estimation, mean-score comparison and decomposition, and a verification lab
that numerically checks the defining inequalities of proper rules.
"""

from .estimation import FitResult, fit_conditional_min_score, fit_min_score, nelder_mead
from .evaluation import (
    ComparisonReport,
    DecompositionReport,
    compare,
    corp_decompose,
    functional_score,
    mean_score,
)
from .kernels import (
    GFunction,
    Kernel,
    g_registry,
    generalized_kernel_score,
    kernel_divergence,
    kernel_entropy,
    kernel_from_spec,
    kernel_registry,
    kernel_score_exact,
    kernel_score_mc,
    weight_transform,
)
from .local import (
    MIX2_PARAMS,
    hyvarinen_score,
    hyvarinen_score_fd,
    logcosh_score,
    logcosh_score_from_oracle,
    normal_oracle,
    two_normal_mixture_oracle,
)
from .model import (
    Categorical,
    ClassLabel,
    DensityOracle,
    Ensemble,
    Forecast,
    MultivariateNormal,
    Normal,
    NumericFailure,
    ScoreValue,
    ValidationError,
    forecast_cdf,
    forecast_sample,
    make_rng,
    parse_forecast,
    parse_observation,
    serialize_forecast,
)
from .multivariate import (
    dawid_sebastiani,
    dawid_sebastiani_from_ensemble,
    energy_score,
    variogram_score,
)
from .propriety import (
    ConcavityReport,
    InvarianceReport,
    ProprietyReport,
    RepresentationReport,
    SpectralReport,
    SymmetryReport,
    concavity_scan,
    crps_representation_check,
    invariance_check,
    propriety_scan,
    spectral_proportionality_check,
    symmetry_metric_check,
)
from .univariate import (
    brier_binary,
    crps_ensemble,
    crps_normal,
    crps_numeric,
    log_score,
    pseudospherical_score,
    quadratic_score,
    tw_crps,
)

__version__ = "0.1.0"
