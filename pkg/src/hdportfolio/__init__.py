"""Statistical inference for expected-utility optimal portfolios when the
number of assets is comparable to the sample size.

The package provides plug-in and shrinkage estimators of the optimal weight
vector, whole-vector and linear-restriction hypothesis tests calibrated for
the proportional regime, closed-form asymptotic oracles, a reproducible Monte
Carlo harness and a rolling-window pipeline for empirical return data.
"""

from .config import TOL, Tolerances
from .errors import (
    DegenerateSlope,
    HDPortfolioError,
    InsufficientAssets,
    MissingDataError,
    NegativeVariance,
    NormViolation,
    NotPositiveDefinite,
    ParseError,
    SingularMidMatrix,
    ZeroDenominator,
    ZeroDirection,
)
from .hdtest import (
    ConfidenceInterval,
    DistFamily,
    LinearHypothesis,
    TestResult,
    chi2_cdf,
    chi2_quantile,
    mahalanobis_hd_noncentrality,
    mahalanobis_noncentrality,
    noncentral_chi2_cdf,
    normal_cdf,
    normal_quantile,
    shrinkage_ci,
    test_mahalanobis,
    test_mahalanobis_hd,
    test_shrinkage,
    test_shrinkage_tilde,
)
from .ingest import (
    ReturnDataset,
    RollingResult,
    WindowRecord,
    dataset_from_panel,
    load_returns,
    rolling_analysis,
    select_universe,
    write_returns_csv,
)
from .montecarlo import (
    MCReport,
    ScenarioConfig,
    TheoryCheck,
    TheoryReport,
    build_model,
    empirical_size,
    gen_covariance,
    gen_mean,
    mahalanobis_size_table,
    power_curve,
    roc_curve,
    sample_returns,
    shift_scenario,
    shrinkage_size_table,
    verify_theory,
)
from .portfolio import (
    GAMMA_INF,
    EstimatedStats,
    FrontierStats,
    ModelParams,
    PortfolioWeights,
    WeightKind,
    estimated_stats,
    eta_consistent,
    eta_limit,
    eu_weights,
    frontier_stats,
    gmv_weights,
    plugin_eu_weights,
)
from .shrinkage import (
    IntensityDecomposition,
    OmegaAlpha,
    OmegaVariant,
    SensitivityVector,
    bfgse_weights,
    estimated_intensity,
    gmv_intensity_variance,
    intensity_variance,
    limiting_intensity,
    omega_alpha,
    oracle_intensity,
    sensitivity_vectors,
)
from .statcore import (
    MomentEstimates,
    PrecisionBundle,
    ReturnMatrix,
    invert_spd,
    precision_bundle,
    q_matrix,
    sample_moments,
)
from .theory import (
    FrontierFormLimit,
    QuadFormLimit,
    delta_transform,
    lambda_matrix,
    lambda_values_from_moments,
    mp_moment_quadrature,
    mp_moments,
    quadform_limit,
    theta_matrix,
    xi_matrix,
)

__version__ = "0.1.0"
