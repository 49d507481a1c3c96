"""Exception types shared across the package.

The CLI maps these onto exit codes: parameter/geometry/resource problems
give 1, solver breakdowns give 2, and failed internal validation
(residual or pipeline-consistency checks) gives 3.
"""


class MetawaveError(Exception):
    """Base class for all package errors."""


class ParameterError(MetawaveError, ValueError):
    """An argument or configuration value violates a precondition."""


class GeometryError(MetawaveError):
    """The microstructure is incompatible with the requested operation."""


class DegenerateConfigurationError(MetawaveError):
    """The slab interface-matching system is (numerically) singular."""


class ResourceLimitError(MetawaveError):
    """A requested discretisation exceeds the configured size cap."""


class SolverError(MetawaveError):
    """A linear solve failed outright."""


class FactorizationError(SolverError):
    """Sparse factorization could not be computed."""


class ResonanceSingularityError(SolverError):
    """Lossless inclusion problem hit a discrete interior resonance."""


class AccuracyError(MetawaveError):
    """A computed solution failed its discrete residual check."""


class ConsistencyError(MetawaveError):
    """Pipeline stages were combined with mismatched parameters."""
