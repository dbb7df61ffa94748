"""Spectral diagnostics for embedding covariances.

Eigen-analysis of the empirical covariance, noise-floor based recoverable
dimension, class-separation energy and ROC-AUC, a power-law tail filter for
starved spectra, and a seeded synthetic laboratory to check all of them
against known population truth.
"""

__version__ = "0.1.0"

from spectral_lab.diagnostics import (
    DiagnosticsReport,
    NoiseFloor,
    SignalDecomposition,
    SlopeFit,
    class_contrast,
    davis_kahan_bound,
    decompose,
    diagnose,
    effective_rank,
    eigengap,
    noise_floor,
    recoverable_dimension,
    riemann_zeta,
    signal_decomposition,
    spectral_slope,
    split_half_floor,
    structural_dimensionality,
    truncated_zeta,
)
from spectral_lab.errors import (
    CalibrationRefused,
    ConfigError,
    ContractError,
    DataQualityError,
    DivergenceError,
    InputFileError,
    NumericalError,
    SpectralLabError,
)
from spectral_lab.matrix import (
    CovarianceMatrix,
    EmbeddingSet,
    PrincipalAngles,
    Spectrum,
    center,
    covariance,
    eig_sym,
    jacobi_eigh,
    op_norm_sym_diff,
    principal_angles,
)
from spectral_lab.separation import (
    MahalanobisResult,
    fisher_direction,
    fisher_score_auc,
    gaussian_auc,
    macro_ovr_auc,
    mahalanobis_energy,
    roc_auc,
)
from spectral_lab.synthlab import (
    SweepConfig,
    SweepResult,
    SyntheticSpec,
    gen_population,
    run_sweep,
    sample,
    scaling_fit,
)
from spectral_lab.zetafilter import (
    CalibratedSpectrum,
    calibrate,
    calibrated_fisher,
    calibrated_mahalanobis,
)
