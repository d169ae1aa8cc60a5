"""Exception hierarchy shared across the package."""


class SpectralError(Exception):
    """Base class for all floq3 errors."""


class NonzeroQMean(SpectralError):
    """The mean (n = 0 Fourier mode) of q must vanish."""


class NonRealCoefficient(SpectralError):
    """Fourier data does not describe a real-valued coefficient."""


class NonzeroPMean(SpectralError):
    """Operation requires the mean of p to vanish."""


class ToleranceNotMet(SpectralError):
    """Adaptive integrator could not reach the requested local error."""


class ZeroLambda(SpectralError):
    """Operation is undefined at the spectral origin (divides by the cube root)."""


class NonRealLambda(SpectralError):
    """Identity is only valid for real spectral parameters."""


class CountMismatch(SpectralError):
    """A zero count disagrees with the structural counting guarantee."""


class WindowTooCoarse(SpectralError):
    """Scan grid too coarse to rule out missed sign changes; use a finer grid."""


class InsufficientData(SpectralError):
    """Not enough entries for the requested fit or reconstruction."""


class UnsupportedOrder(SpectralError):
    """Requested expansion order exceeds the supported depth."""
