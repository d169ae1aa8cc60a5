"""floq3: spectral data of the self-adjoint third-order periodic operator.

Submodules follow the pipeline: coeffs (Fourier model of p, q), monodromy
(one-period propagation), multipliers (characteristic cubic, discriminant),
spectrum_scan (multiplicity-3 bands and ramifications), eigenvalues
(periodic/antiperiodic spectra and trace reconstruction), small_coupling
(perturbation series and the small-band law), cli (batch front end).
"""

from .coeffs import Coefficients, Kappa, from_fourier, invariant_h, kappa
from .eigenvalues import (
    EigenvalueList,
    d_plus_minus,
    find_eigenvalues,
    hadamard_D,
    reconstruct_T,
    validate_eigenvalue_asymptotics,
)
from .errors import (
    CountMismatch,
    InsufficientData,
    NonRealCoefficient,
    NonRealLambda,
    NonzeroPMean,
    NonzeroQMean,
    SpectralError,
    ToleranceNotMet,
    UnsupportedOrder,
    WindowTooCoarse,
    ZeroLambda,
)
from .monodromy import (
    IntegratorOptions,
    Monodromy,
    SpectralPoint,
    picard_terms,
    point,
    propagate,
    propagate_many,
    propagate_scaled,
    trace_asymptotic,
)
from .multipliers import (
    DiscriminantValue,
    MultiplierTriple,
    characteristic_cubic,
    discriminant,
    discriminant_ab,
    discriminant_from_trace,
    psi,
    solve_multipliers,
)
from .small_coupling import (
    BandPrediction,
    EpsilonSeries,
    epsilon_terms,
    measure_band,
    predict_band,
)
from .spectrum_scan import (
    BandReport,
    RamificationRecord,
    locate_ramifications,
    scan_s3,
    validate_ramification_asymptotics,
)

__all__ = [
    "Coefficients",
    "Kappa",
    "from_fourier",
    "invariant_h",
    "kappa",
    "IntegratorOptions",
    "Monodromy",
    "SpectralPoint",
    "point",
    "propagate",
    "propagate_many",
    "propagate_scaled",
    "picard_terms",
    "trace_asymptotic",
    "MultiplierTriple",
    "DiscriminantValue",
    "characteristic_cubic",
    "solve_multipliers",
    "discriminant",
    "discriminant_from_trace",
    "discriminant_ab",
    "psi",
    "BandReport",
    "RamificationRecord",
    "scan_s3",
    "locate_ramifications",
    "validate_ramification_asymptotics",
    "EigenvalueList",
    "d_plus_minus",
    "find_eigenvalues",
    "hadamard_D",
    "reconstruct_T",
    "validate_eigenvalue_asymptotics",
    "EpsilonSeries",
    "BandPrediction",
    "epsilon_terms",
    "predict_band",
    "measure_band",
    "SpectralError",
    "NonzeroQMean",
    "NonRealCoefficient",
    "NonzeroPMean",
    "ToleranceNotMet",
    "ZeroLambda",
    "NonRealLambda",
    "CountMismatch",
    "WindowTooCoarse",
    "InsufficientData",
    "UnsupportedOrder",
]

__version__ = "0.1.0"
