"""Exception types shared across the package."""


class AcdcflowError(Exception):
    """Base class for all package errors."""


class CaseParseError(AcdcflowError):
    """Malformed case text. Carries the 1-based source line when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class StructuralError(AcdcflowError):
    """Case records that parse but do not form a valid network."""


class PartitionError(AcdcflowError):
    """A partition that cannot host a valid per-area solve."""


class SingularMatrixError(AcdcflowError):
    """Zero or near-zero pivot during factorization. Carries the column."""

    def __init__(self, column, pivot=0.0):
        self.column = column
        self.pivot = pivot
        super().__init__(f"singular pivot at column {column} (|pivot| = {abs(pivot):.3e})")


class InfeasibleLinkError(AcdcflowError):
    """Converter angles cannot be brought into a solvable range."""

    def __init__(self, link_id, quantity, value):
        self.link_id = link_id
        self.quantity = quantity
        self.value = value
        super().__init__(
            f"link {link_id}: {quantity} = {value:.6g} has no solution within tap range"
        )


class BenchError(AcdcflowError):
    """A benchmark run produced results that differ from the reference run."""
