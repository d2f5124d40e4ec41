"""Exception taxonomy shared by the whole library.

Two families matter to callers: structural errors (malformed input: wrong
shapes, non-finite entries, unparseable files) and domain errors (well-formed
input that violates a mathematical precondition).  The CLI maps structural
errors to exit code 2 and domain errors to exit code 3.
"""


class HdTestError(Exception):
    """Base class for every library-specific error."""


class StructuralError(HdTestError, ValueError):
    """Input is malformed: bad shape, ragged file, NaN/inf entries, unknown name."""


class DomainError(HdTestError, ValueError):
    """Input is well-formed but outside the mathematical domain of the operation."""


class SingularCovarianceError(DomainError):
    """A covariance matrix that must be inverted is singular or numerically singular."""


class UnsupportedAspectRatioError(DomainError):
    """The aspect ratio p == n, where the shrinkage transform is undefined."""


class DegenerateSpectrumError(DomainError):
    """The sample spectrum cannot support shrinkage (zeros/negatives where positives are required)."""


class DegenerateVarianceError(DomainError):
    """A variance estimate that must be positive came out non-positive."""
