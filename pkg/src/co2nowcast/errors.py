"""Exception hierarchy shared across the package."""


class DataError(Exception):
    """Base class for all data/model errors raised by this package."""


class DomainError(DataError):
    """A value is outside the mathematical domain of an operation."""


class LengthError(DataError):
    """A series or vector is too short for the requested operation."""


class CoverageError(DataError):
    """Requested periods are not covered by the available data."""


class SingularDesignError(DataError):
    """Regression design is rank deficient or otherwise degenerate."""


class DegenerateEntityError(DataError):
    """An entity has too few observations to be estimated."""


class UnknownEntityError(DataError):
    """Prediction requested for an entity absent from the training panel."""


class UnknownVariableError(DataError):
    """A variable is missing from the release schedule or dataset."""


class OrderingError(DataError):
    """Inputs violate a required ordering (e.g. non-ascending quantiles)."""


class ScoringGapError(DataError):
    """Archive rows are missing predictions or realized values."""


class ConfigError(DataError):
    """Invalid run configuration or manifest."""


class IngestError(DataError):
    """CSV schema violation; message carries file/line diagnostics."""
