"""Exception hierarchy shared by every module of the package."""


class HeckeError(Exception):
    """Base class for all errors raised by analytic_hecke."""


class DivisionByPossibleZero(HeckeError, ZeroDivisionError):
    """The divisor ball does not exclude zero."""


class EmptySpace(HeckeError, ValueError):
    """The requested space of cusp forms is zero-dimensional."""


class InsufficientLength(HeckeError, ValueError):
    """A q-expansion is too short for the requested operation."""


class NonSquarefreeCharPoly(HeckeError, ArithmeticError):
    """No Hecke operator among the tried primes has a squarefree characteristic polynomial."""


class EmbeddingOutOfRange(HeckeError, IndexError):
    pass


class NonPositiveAccuracy(HeckeError, ValueError):
    pass


class NonPositiveImaginaryPart(HeckeError, ValueError):
    """A point (or part of a ball) is not in the upper half plane."""


class UncertainRegion(HeckeError, ArithmeticError):
    """Point reduction could not decide a branch; retry at higher precision."""


class PrecisionExhausted(HeckeError, ArithmeticError):
    """The accuracy target was not met within the precision retry limit."""


class UnsupportedLevel(HeckeError, ValueError):
    pass


class IndeterminateSign(HeckeError, ArithmeticError):
    """Both Atkin-Lehner signs remain consistent at attainable precision."""


class ProbablyZero(HeckeError, ArithmeticError):
    """A value could not be separated from zero; the evaluation point is likely near a zero of f."""


class CompositeIndex(HeckeError, ValueError):
    """A Hecke operator index that must be prime is not."""


class ParseError(HeckeError, ValueError):
    pass


class NotNormalized(HeckeError, ValueError):
    """Coefficient data with a_1 != 1."""


class NetworkError(HeckeError, OSError):
    pass


class NotFound(HeckeError, LookupError):
    pass


class DeligneBoundViolation(HeckeError, ArithmeticError):
    """A computed eigenvalue exceeds the Ramanujan-Petersson bound; the input is not a newform."""
