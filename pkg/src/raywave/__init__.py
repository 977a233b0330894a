"""raywave: a desk-scale numerical laboratory connecting ray optics,
Hamilton-Jacobi mechanics, wave-packet propagation, and guided trajectories."""

__version__ = "0.1.0"

from .fields import (  # noqa: F401
    ComplexField,
    Grid,
    PhysicalConstants,
    RealField,
    amplitude_phase_compose,
    amplitude_phase_decompose,
    divergence,
    gaussian_packet,
    gradient,
    laplacian,
    norm_squared_integral,
    normalize,
)
