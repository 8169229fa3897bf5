"""Exception types shared across the package."""


class SrsubError(Exception):
    """Base class for package errors."""


class DegenerateY(SrsubError):
    """Output column carries no rank signal (constant, or zero denominator)."""


class NotSolvable(SrsubError):
    """Equation cannot be inverted for the requested variable."""


class Inconclusive(SrsubError):
    """Symbolic and numeric dependence checks disagree."""


class TooFewRows(SrsubError):
    """A dataset transform dropped more rows than allowed."""


class Unverifiable(SrsubError):
    """No variable of the candidate could be solved for during verification."""


class Unsampleable(SrsubError):
    """The sampling interval grew past its limit without enough valid rows."""


class ExternalFailure(SrsubError):
    """An external regressor subprocess failed or produced unusable output."""


class UnsupportedExpression(SrsubError):
    """An expression uses a construct outside the supported operator set."""


class IllConditionedWarning(UserWarning):
    """Least-squares system was numerically singular; ridge fallback used."""
