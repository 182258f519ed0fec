"""Exception types raised by the solvers."""


class CacpError(Exception):
    """Base class for all package errors."""


class ConfigurationError(CacpError, ValueError):
    """Invalid grid, run configuration or argument combination."""


class GeometryError(CacpError):
    """Geometry outside its valid range.

    Raised when the computational tube leaves the grid or when the
    curvature factor ``1 + phi * kappa`` (or ``1 + phi * h``) is not
    positive where it is used.
    """


class ClosestPointError(CacpError):
    """Closest-point iteration did not converge.

    Attributes
    ----------
    points : ndarray
        The offending query points.
    best : ndarray
        Best parameter candidates found for those points.
    """

    def __init__(self, message, points=None, best=None):
        super().__init__(message)
        self.points = points
        self.best = best


class AssemblyError(CacpError):
    """A stencil referenced a node that is not in the band."""

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class SingularMatrixError(CacpError):
    """Factorization failed because the matrix is (numerically) singular."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot
