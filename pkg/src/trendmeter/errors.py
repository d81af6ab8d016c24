"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
MissingArtifactError -> 4.
"""


class TrendmeterError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(TrendmeterError):
    """Invalid or incomplete run configuration."""


class DataError(TrendmeterError):
    """Malformed, inconsistent, or out-of-contract input data."""


class MissingArtifactError(TrendmeterError):
    """A pipeline stage requires an upstream artifact that does not exist."""


class ConstantInputError(DataError):
    """A correlation input had zero variance."""


class InsufficientOverlapError(DataError):
    """Two series share fewer valid points than the configured minimum."""


class ZeroVarianceError(DataError):
    """All usable observations are identical; no principal direction exists."""


class SchemaMismatchError(DataError):
    """A feature matrix does not conform to a trained model's schema."""


class FetchError(TrendmeterError):
    """The live trends fetcher failed after its bounded retries."""


class ThrottledError(FetchError):
    """The trends endpoint answered with a quota / rate-limit response."""
