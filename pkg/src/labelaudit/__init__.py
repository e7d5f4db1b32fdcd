"""Toolkit for simulating, ranking, evaluating, and reviewing bounding-box label errors."""

__version__ = "0.1.0"

from .errors import CorruptionError, InputError, LabelAuditError, SchemaError

__all__ = [
    "LabelAuditError",
    "SchemaError",
    "InputError",
    "CorruptionError",
    "__version__",
]
