"""Exception hierarchy shared by the engine, CLI, and HTTP service.

Every error the engine raises maps to exactly one of these classes so the
service layer can translate them into stable API error codes.
"""


class EngineError(Exception):
    """Base class for all errors raised by this package."""

    api_code = "io"


class SchemaError(EngineError):
    """Input does not conform to the dataset schema (wrong arity, bad name)."""

    api_code = "bad_pattern"


class PatternError(EngineError):
    """A cohort pattern string or selector sequence is malformed."""

    api_code = "bad_pattern"


class UnknownValueError(EngineError):
    """An attribute value or code that is not in the dictionary."""

    api_code = "unknown_value"


class EmptyCohortError(EngineError):
    """A statistic that requires data was requested for an empty cohort."""

    api_code = "empty_cohort"


class EpochRangeError(EngineError):
    """An epoch range with from > to, or an empty/invalid range."""

    api_code = "range_error"


class CapacityError(EngineError):
    """A cube or grouping-set request exceeds configured limits."""

    api_code = "capacity"


class ConfigMismatchError(EngineError):
    """Two aggregates with incompatible histogram configurations."""

    api_code = "bad_pattern"


class StoreError(EngineError):
    """Replay-store I/O failure, missing file, or checksum mismatch."""

    api_code = "io"
