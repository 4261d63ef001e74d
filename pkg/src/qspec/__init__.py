"""qspec: quantile (copula) spectral analysis for locally stationary
Gaussian AR(1) testbeds.

Exact copula covariance kernels and their Fourier sums (time-varying copula
spectra, Wigner-Ville quantile spectra, classical spectra, discrete Wigner
distributions), a lag-window estimator, and a verification harness for the
convergence and summability properties that make the time-varying copula
spectrum well defined.
"""

from .copula import (
    CopulaCovTable,
    McEstimate,
    QuantileLevel,
    SummabilityBudget,
    array_cov_table,
    bvn_cdf,
    gaussian_copula_indicator_cov,
    geometric_budget,
    geometric_tail,
    indicator_cov_array,
    indicator_cov_mc,
    indicator_cov_stationary,
    stationary_cov_table,
    summability_scan,
)
from .estimate import (
    ClippedSeries,
    EstimatedSpectrum,
    LagWindow,
    bartlett_window,
    clip_path,
    default_window,
    ensemble_estimate,
    parzen_window,
    point_window,
    wv_lag_window_estimate,
)
from .exceptions import (
    BoundaryError,
    ConfigError,
    DegenerateCorrelationError,
    DegenerateDataError,
    GridMismatchError,
    QspecError,
    ReplicationError,
    UnstableModelError,
)
from .models import (
    CoefficientCurve,
    PathEnsemble,
    SamplePath,
    StationaryFamilyModel,
    TriangularArrayModel,
    array_cross_cov,
    ceil_root,
    child_seeds,
    default_curve,
    family_corr,
    simulate_ensemble,
    simulate_path,
)
from .spectra import (
    FrequencyGrid,
    Provenance,
    SpectrumGrid,
    classical_tv_spectrum,
    classical_wv_spectrum,
    copula_tv_spectrum,
    discrete_wigner,
    l2_distance,
    l2_distance_per_pair,
    stationary_truncation,
    sup_distance,
    sup_distance_per_pair,
    wv_quantile_spectrum,
)
from .verify import (
    BoundRow,
    ConvergenceReport,
    LocalStationarityCertificate,
    SummabilityReport,
    certify_local_stationarity,
    check_lag_bound,
    l2_convergence_sweep,
    summability_check,
    sup_convergence_sweep,
)

__version__ = "0.1.0"
