"""Exception hierarchy shared by all modules."""


class HeisenbergError(Exception):
    """Base class for errors raised by hmeasure."""


class DimensionError(HeisenbergError, ValueError):
    """Operands live in Heisenberg groups of different dimension, or a
    vector has the wrong length."""


class DomainError(HeisenbergError, ValueError):
    """A parameter point lies outside the declared domain box."""


class ParseError(HeisenbergError, ValueError):
    """Malformed expression text.  ``position`` is a 0-based character offset."""

    def __init__(self, message, text="", position=0):
        self.text = text
        self.position = position
        self.message = message
        super().__init__(f"{message} at offset {position}")

    def diagnostic(self):
        """Two-line caret diagnostic pointing at the offending offset."""
        return f"{self.text}\n{' ' * self.position}^ {self.message}"


class UnknownIdentifierError(ParseError):
    pass


class EvaluationError(HeisenbergError, ArithmeticError):
    """Division by zero, log or sqrt outside their domain, or a non-finite value."""


class InvariantError(HeisenbergError):
    """A structural invariant of a constructed object does not hold."""


class EmbeddingError(InvariantError):
    """Coordinate partials of a parametrization are (numerically) dependent."""


class ChartInconsistencyError(InvariantError):
    """A level-set chart does not map into the level set it claims to cover."""


class DistanceSpecError(InvariantError):
    """A radial profile failed the homogeneity or positivity sample tests."""


class NotSimpleError(HeisenbergError, ValueError):
    """A p-vector expected to be simple (decomposable) is not."""


class NotVerticalError(HeisenbergError, ValueError):
    pass


class DegreeError(HeisenbergError, ValueError):
    pass


class UnsupportedDistanceError(HeisenbergError, ValueError):
    """The distance is not known to have constant metric factor."""


class BallTouchesBoundaryError(HeisenbergError):
    """The preimage of a metric ball is not compactly inside the parameter box."""


class DegenerateLevelSetError(HeisenbergError, ValueError):
    """The Riemannian jacobian vanishes, so the level set is not a submanifold there."""
