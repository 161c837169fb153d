"""Exception types shared across the package.

Numerical failures derive from :class:`NumericalError` and data/usage
problems from :class:`DataError`; the CLI maps them to exit codes 3 and 2.
"""


class CmboError(Exception):
    pass


class NumericalError(CmboError, ArithmeticError):
    pass


class DataError(CmboError, ValueError):
    pass


class NotPositiveDefinite(NumericalError):
    pass


class EigenFailure(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class DegenerateMember(NumericalError):
    pass


class NonFiniteDistance(NumericalError):
    pass


class DimensionMismatch(DataError):
    pass


# the benchmark loader reports the same condition under this name
DimMismatch = DimensionMismatch


class RowNotOnGrid(DataError):
    pass


class InsufficientData(DataError):
    pass


class InvalidC(DataError):
    pass


class SingleCluster(DataError):
    pass


class EmptyCluster(DataError):
    pass


class AllCandidatesExhausted(CmboError):
    pass


class OracleFailure(CmboError):
    pass


class ParseError(DataError):
    pass


class SchemaError(DataError):
    pass


class TooFewTasks(DataError):
    pass


class MismatchedTraceLengths(DataError):
    pass
