"""Exception hierarchy shared by every module."""

from __future__ import annotations


class FmtError(Exception):
    """Base class for workbench errors."""


class VocabularyError(FmtError, ValueError):
    pass


class DimensionError(FmtError, ValueError):
    pass


class StructureFormatError(FmtError, ValueError):
    pass


class EnumerationLimitError(FmtError):
    """Raised when an exhaustive scan would exceed its visit budget."""

    def __init__(self, count: int, budget: int, what: str = "structures"):
        self.count = count
        self.budget = budget
        self.what = what
        super().__init__(f"enumeration of {count} {what} exceeds budget {budget}")


class EvaluationError(FmtError, ValueError):
    pass


class EmptyDomainError(EvaluationError):
    pass


class OracleConfigurationError(FmtError):
    """A class oracle turned out not to be closed under isomorphism."""


class ArityError(FmtError, ValueError):
    pass


class SizeCapError(FmtError, ValueError):
    pass
