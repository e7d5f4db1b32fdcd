"""Exception types shared across the package."""


class LabelAuditError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(LabelAuditError):
    """A persisted file violates its format contract."""


class InputError(LabelAuditError):
    """An argument or in-memory record violates a precondition."""


class CorruptionError(LabelAuditError):
    """An error sampler could not produce a valid record."""
