"""Empirical and sequential empirical copula processes for serially dependent
data: rank-based estimation, bootstrap resampling, Gaussian limit-field
simulation, and the inference procedures built on them."""

from .core import (
    Field,
    Grid,
    RandomStream,
    make_uniform_grid,
    parallel_map,
    snapped_grid,
    sup_norm,
)
from .empirical import (
    CsvFormatError,
    DataMatrix,
    PseudoSample,
    StepCdf,
    TieError,
    copula_process,
    empirical_copula,
    empirical_copula_raw,
    generalized_inverse,
    pseudo_observations,
    sequential_process_plus,
    sequential_process_sharp,
)
from .inference import (
    ConfigError,
    IntervalReport,
    TestReport,
    constancy_test,
    ks_distance,
    mc_experiment,
    rejection_rate_experiment,
    spearman_ci,
    spearman_coverage_experiment,
    spearman_rho,
    symmetry_test,
)
from .limitfield import (
    CovarianceSpec,
    GaussianFieldSample,
    GaussianFieldSampler,
    NumericalError,
    delta_transform,
    delta_transform_plus,
    delta_transform_sharp,
    sample_gaussian_field,
)
from .models import (
    ClaytonCopula,
    ComonotoneCopula,
    CopulaModel,
    DerivativeUnsupportedError,
    GaussianCopula,
    GumbelCopula,
    IidGenerator,
    IndependenceCopula,
    KhoudrajiCopula,
    RegimeGenerator,
    Var1Generator,
)
from .resample import (
    WeightScheme,
    WeightVector,
    bootstrap_copula,
    bootstrap_process,
    bootstrap_replicates,
    default_block_len,
    draw_weights,
    weighted_pseudo_observations,
)

__version__ = "0.1.0"
