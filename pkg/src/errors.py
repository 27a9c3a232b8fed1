"""
Exception types for the PVA toolkit.
Every error raised on purpose by the package derives from PVAError.
"""

from typing import Optional


class PVAError(ValueError):
    """Base class for all toolkit errors."""
    pass


class InputError(PVAError):
    """Malformed input: empty data, wrong shapes, mismatched sizes, bad indices."""
    pass


class MissingValueError(InputError):
    """A missing cell was found. Imputation is out of scope."""

    def __init__(self, message: str, row: Optional[int] = None, column: Optional[str] = None):
        super().__init__(f"{message} (imputation out of scope)")
        self.row = row
        self.column = column


class DegenerateColumnError(InputError):
    """A column carries no usable variation for the requested estimator."""

    def __init__(self, message: str, column: Optional[str] = None):
        super().__init__(message if column is None else f"{message}: {column}")
        self.column = column


class SchemaError(InputError):
    """A declared schema is invalid or disagrees with the data."""
    pass


class NumericalError(PVAError):
    """Degenerate pivots, singular blocks, failed factorizations."""
    pass


class SelectionError(PVAError):
    """Invalid selection request (q out of range, exhaustive search too large)."""
    pass


class SimulationError(PVAError):
    """A simulation run excluded too many replicates."""

    def __init__(self, message: str, excluded: int = 0, total: int = 0):
        super().__init__(f"{message} (excluded {excluded} of {total} replicates)")
        self.excluded = excluded
        self.total = total


def column_label(index: int, names=None) -> str:
    """Human-readable label for a column: its header name when known."""
    if names is not None and 0 <= index < len(names):
        return str(names[index])
    return f"column {index}"
