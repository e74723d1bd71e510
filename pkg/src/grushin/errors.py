"""Exception types shared across the package.

Two failure families matter to callers: bad configuration (rejected before
any heavy work) and numerical trouble detected mid-run.  The CLI maps
ConfigError to exit status 2 and NumericalError to exit status 3.
"""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration, rejected up front."""


class NumericalError(RuntimeError):
    """A computation left its validated regime (diverged, under-resolved, aliased)."""


class QuadratureError(NumericalError):
    """Quadrature cannot resolve the requested modes or frequencies."""


class AliasingError(NumericalError):
    """Nonlinear evaluation would alias outside the retained spectrum."""
