"""Exception types shared across the package."""


class FeynlabError(Exception):
    """Base class for package specific failures."""


class DimensionError(FeynlabError, ValueError):
    """A weight, field or covector does not fit the ambient dimension."""


class InsufficientDataError(FeynlabError, ValueError):
    """Not enough usable data to estimate a quantity (e.g. decay shells)."""


class ChartError(FeynlabError, ValueError):
    """A compactification chart is degenerate at the requested point."""


class ClassificationError(FeynlabError, ValueError):
    """A ray trace cannot be classified against the radial sets."""


class PoleError(FeynlabError, ValueError):
    """A weight line passes through an indicial root."""


class InfeasibleParameterError(FeynlabError, ValueError):
    """Requested order/weight parameters admit no valid construction."""


class ZeroModeError(FeynlabError, ValueError):
    """Zero-frequency content present while the policy excludes it."""


class SupportError(FeynlabError, ValueError):
    """Field support escapes the box under a requested transformation."""


class ResolutionError(FeynlabError, ValueError):
    """Quadrature or lattice resolution too coarse for the request."""


class StiffnessError(FeynlabError, RuntimeError):
    """Adaptive integration failed (step size underflow or solver abort)."""
