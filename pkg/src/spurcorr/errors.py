"""Exception hierarchy shared across the package.

Every computational failure raises a subclass of :class:`SpurcorrError`, so
callers (and the CLI) can distinguish usage errors from numerical ones.
"""


class SpurcorrError(Exception):
    """Base class for all errors raised by this package."""


class SingularGram(SpurcorrError):
    """A subset Gram matrix is numerically singular (collinear subset)."""


class CandidateSetTooLarge(SpurcorrError):
    """Branch-and-bound candidate set exceeds the combinatorial guard."""


class ProblemTooLarge(SpurcorrError):
    """Exhaustive enumeration would exceed the subset-count guard."""


class DegenerateResponse(SpurcorrError):
    """Response/residual vector has (numerically) zero variance."""


class DegenerateFit(SpurcorrError):
    """Fitted-value vector is constant, so no correlation is defined."""


class EmptySelection(SpurcorrError):
    """A nonempty selected set is required for the residualized bootstrap."""


class InvalidModel(SpurcorrError):
    """Covariance-model parameters do not define a valid model."""


class InvalidP(SpurcorrError):
    """Dimension p is too small for the extreme-value normalization."""


class QuadratureFailure(SpurcorrError):
    """Adaptive quadrature could not reach the requested accuracy."""


class NoConvergence(SpurcorrError):
    """Coordinate descent failed to converge within the sweep budget."""


class SingularDesign(SpurcorrError):
    """Least-squares design submatrix is rank deficient."""


class NumericalDriftError(SpurcorrError):
    """An internal self-check (recomputed correlation) failed."""


class ParseError(SpurcorrError):
    """A CSV token could not be parsed as a finite number.

    Carries 1-based ``row`` and ``col`` of the first offending token.
    """

    def __init__(self, message: str, row: int, col: int):
        super().__init__(message)
        self.row = row
        self.col = col


class RaggedRows(SpurcorrError):
    """CSV rows do not all have the same number of fields."""
