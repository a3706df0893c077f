"""Exception hierarchy.

Every error raised deliberately by the library derives from
:class:`GLVortexError`, so callers (notably the CLI) can map failures to
exit codes without catching unrelated exceptions.
"""

from __future__ import annotations


class GLVortexError(Exception):
    """Base class for all library errors."""


class InputError(GLVortexError, ValueError):
    """Malformed or inconsistent user input."""


class NumericalError(GLVortexError, RuntimeError):
    """A numerical procedure failed or lost accuracy."""


class GeometryError(InputError):
    """Invalid boundary curve or inconsistent orientation."""


class DomainError(InputError):
    """A point lies outside the closed domain."""


class CollarRangeError(InputError):
    """Normal offset outside the collar neighbourhood."""


class MeshError(NumericalError):
    """Triangulation could not be produced."""


class ConfigError(InputError):
    """Vortex configuration is inadmissible for the requested operation."""


class ParamError(InputError):
    """A numerical parameter is out of its admissible range."""


class UnsupportedDegreeError(ConfigError):
    """Operation only supports vortices of degree +1 or -1."""


class PreconditionError(InputError):
    """A field does not satisfy the precondition of an operation."""


class ResolutionError(NumericalError):
    """Discretization too coarse for the requested scale."""


class CompatibilityError(NumericalError):
    """Neumann data do not integrate to zero."""


class SolverError(NumericalError):
    """Linear solver did not reach its tolerance."""


class QuantizationError(NumericalError):
    """Phase circulation is not an integer multiple of 2*pi."""


class NumericsError(NumericalError):
    """An extrapolation or limit procedure did not converge."""


class ConvergenceError(NumericalError):
    """Iterative minimization stalled."""


class CoreCrossingError(NumericalError):
    """A loop passes through a vortex core where the phase is undefined."""
