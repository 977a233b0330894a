"""Exception types shared across the package."""


class RayWaveError(Exception):
    """Base class for all errors raised by this package."""


class FieldShapeError(RayWaveError):
    """Field values do not match their grid, or two fields live on different grids."""


class DomainError(RayWaveError):
    """A position, packet, or trajectory violates the sampled domain."""


class NormalizationError(RayWaveError):
    """A field with zero (or non-finite) norm cannot be normalized."""


class UnwrapError(RayWaveError):
    """Phase extraction failed because the amplitude is below threshold everywhere."""


class NoTransmissionError(RayWaveError):
    """Refraction into the second medium is impossible (sin of refracted angle > 1)."""


class TotalInternalReflectionError(NoTransmissionError):
    """Wave-law refraction has no transmitted branch for the given angle and indices."""


class SingularPhaseError(RayWaveError):
    """The phase gradient vanishes everywhere requested, so no direction is defined."""


class NodeRegionError(RayWaveError):
    """A particle sits in a near-zero-amplitude region where guidance is unresolved."""


class LinearSolveError(RayWaveError):
    """Tridiagonal elimination hit a negligible pivot (time step / spacing pathology)."""


class CFLError(RayWaveError):
    """Advective update would violate the CFL bound max|v| dt / dx <= 0.9."""


class ConfigError(RayWaveError):
    """A run configuration contains unknown keys or invalid values."""
