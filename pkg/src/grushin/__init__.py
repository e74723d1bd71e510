"""Spectral toolbox for the Grushin operator -Delta_x - |x|^2 Delta_y.

Scaled Hermite-Fourier diagonalization, dispersive propagators, dyadic
frequency decomposition, mixed-norm Strichartz experiments, and nonlinear
Cauchy solvers, organized around a fixed tensor quadrature grid so that
spectral and physical representations convert both ways.
"""

__version__ = "0.1.0"

from .errors import AliasingError, ConfigError, NumericalError, QuadratureError

__all__ = [
    "AliasingError",
    "ConfigError",
    "NumericalError",
    "QuadratureError",
    "__version__",
]
