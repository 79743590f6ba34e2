"""Exception taxonomy shared across the package.

Each class corresponds to one category of contract violation; the CLI maps
the class name to a categorized error message and a nonzero exit code.
"""


class ClnceError(Exception):
    """Base class for all package errors."""


class SchemaError(ClnceError):
    """File does not parse under the declared schema."""


class DimensionError(ClnceError):
    """Ragged rows or mismatched record lengths in input data."""


class DomainError(ClnceError):
    """A value lies outside its permitted domain (e.g. attribute not 0/1)."""


class ParameterError(ClnceError):
    """An argument violates its precondition."""


class SizeError(ClnceError):
    """Input too small, too large, or of mismatched length."""


class ShapeError(ClnceError):
    """Array shape mismatch."""


class GraphError(ClnceError):
    """Hierarchy graph is cyclic, disconnected, or multi-rooted."""


class DataError(ClnceError):
    """Dataset content is unusable for the requested operation."""


class NumericError(ClnceError):
    """Non-finite values encountered in numeric computation."""


class StateError(ClnceError):
    """Stale or inconsistent internal state (e.g. mismatched backward cache)."""


class DistributionError(ClnceError):
    """Probability table has negative entries or does not normalize."""
