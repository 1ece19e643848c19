"""Exception types shared across the package."""


class ConesvError(Exception):
    """Base class for all package errors."""


class InvalidInput(ConesvError):
    """Malformed or out-of-contract input data."""


class InvalidGenerator(InvalidInput):
    """A cone generator is unusable (zero column)."""


class RankDeficient(ConesvError):
    """Matrix does not have full column rank where required.

    Carries the numerical rank in ``rank``.
    """

    def __init__(self, msg, rank=None):
        super().__init__(msg)
        self.rank = rank


class NotPSD(ConesvError):
    """Matrix has an eigenvalue below the PSD tolerance."""


class NotPointed(ConesvError):
    """Cone contains a line; the requested method needs a pointed cone."""


class NonPointedDegeneracy(NotPointed):
    """A simplex point mapped to (near) zero: only possible when the cone
    fails pointedness, where x >= 0, e'x = 1 still allows Gx = 0."""


class NoImprovingDirection(ConesvError):
    """A linear cost has no negative-part direction inside the cone."""


class NumericalFailure(ConesvError):
    """A numerical kernel failed beyond recovery."""


class PreprocessingRequired(ConesvError):
    """Solver precondition violated: run the preprocessing cases first."""
