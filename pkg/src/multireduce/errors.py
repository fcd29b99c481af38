"""Exception types shared across the package.

Argument validation failures raise plain ``ValueError``; the classes below
mark domain-level failures that the CLI reports with exit code 1.
"""


class MultireduceError(Exception):
    """Base class for domain errors."""


class NotRealizableError(MultireduceError):
    """A realizable-mode trainer ran out of budget before reaching zero error.

    This does not prove that the sample is non-separable.
    """


class NoSensitiveVectorError(MultireduceError):
    """The code has two identical rows, so no sensitivity guarantee exists."""


class ToleranceUnachievableError(MultireduceError):
    """The tree-to-weight-matrix conversion cannot meet the requested tolerance."""


class EmbeddingInvalidError(MultireduceError):
    """A halfspace embedding failed its realizability certificate."""


class BudgetExceededError(ValueError):
    """An exhaustive enumeration would exceed its configured budget."""
