"""Exception hierarchy.

Invalid inputs raise :class:`InvalidParameterError` (also a ``ValueError``).
Well-formed inputs that fall outside the regime where a result exists raise a
subclass of :class:`DomainError`.
"""


class RuinLabError(Exception):
    """Base class for every error raised by ruinlab."""


class InvalidParameterError(RuinLabError, ValueError):
    """A parameter is out of range or malformed."""


class DomainError(RuinLabError):
    """The request is well-formed but the quantity is not defined or not covered."""


class NetConditionError(DomainError):
    """The sign of the net margin lambda*E[Y] - rho is wrong for the request."""


class RegionError(DomainError):
    """The (x, t) point lies outside the region where a formula is valid."""


class ConvergenceError(DomainError):
    """A root solver or series failed to reach its tolerance."""
