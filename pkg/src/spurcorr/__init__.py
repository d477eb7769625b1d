"""Maximum spurious correlation of best-subset fits.

Core objects: datasets and seeded substreams (:mod:`spurcorr.core`),
simulation designs (:mod:`spurcorr.datagen`), the best-subset search
(:mod:`spurcorr.subset_search`), the spurious-correlation statistic
(:mod:`spurcorr.spurious`), its multiplier-bootstrap null
(:mod:`spurcorr.bootstrap`), analytic limit laws
(:mod:`spurcorr.asymptotics`), penalized fitters
(:mod:`spurcorr.regression`), decision protocols
(:mod:`spurcorr.inference`) and the simulation harness
(:mod:`spurcorr.experiments`).
"""

__version__ = "0.1.0"

from .core import Dataset, GramCache, RngStream, center_columns, gaussian_vector, subset_gram
from .datagen import (
    CovarianceModel,
    LinearModelSpec,
    NoiseModel,
    sample_covariates,
    sample_linear_model,
)
from .subset_search import (
    SubsetProblem,
    SubsetSolution,
    branch_and_bound,
    exhaustive,
    forward_select,
    forward_solution,
    two_step,
)
from .spurious import (
    SpuriousCorrEstimate,
    compute_max_spurious,
    compute_spurious_sequence,
    residual_spurious,
)
from .bootstrap import (
    BootstrapDistribution,
    bootstrap_distribution,
    lla_null_distribution,
    multiplier_replicate,
    quantile,
)
from .asymptotics import (
    LimitLaw,
    gumbel_critical_value,
    gumbel_like_cdf,
    gumbel_like_density,
    gumbel_pvalue,
    gumbel_test_statistic,
    max_chisq_centering,
    top_chisq_sum_cdf,
    top_chisq_sum_sampler,
)
from .regression import (
    FitResult,
    PenaltySpec,
    cv_lasso,
    fit_lasso,
    fit_ols,
    fit_oracle,
    fit_scad_lla,
    scad_derivative,
)
from .inference import TestReport, check_discovery, exogeneity_test

__all__ = [name for name in dir() if not name.startswith("_")]
