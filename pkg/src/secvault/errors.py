"""Exception hierarchy shared by all secvault modules."""


class SecError(Exception):
    """Base class for every error raised by secvault."""


class FieldMismatchError(SecError, ValueError):
    """Operands belong to different finite fields."""


class ConstructionError(SecError, ValueError):
    """Invalid parameters for a field, matrix or code."""


class CapacityError(ConstructionError):
    """The field is too small for the requested code."""


class DimensionError(SecError, ValueError):
    pass


class SingularMatrixError(SecError, ArithmeticError):
    """A square matrix that had to be inverted is singular."""


class InsufficientSharesError(SecError):
    pass


class InconsistentSyndromeError(SecError):
    """No vector of the declared sparsity explains the observed shares."""


class UnusableSubsetError(SecError):
    """The selected rows do not satisfy the sparse-recovery criterion."""


class UnrecoverableError(SecError):
    """Too many failures: a stored object needed for retrieval is lost."""

    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class CorruptShareError(SecError):
    pass


class ArchiveExistsError(SecError, FileExistsError):
    pass


class InsufficientSamplesError(SecError):
    pass


class CensusSizeError(SecError, ValueError):
    """Exhaustive enumeration over 2**n failure patterns is too large."""
