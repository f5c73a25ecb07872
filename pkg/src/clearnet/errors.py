"""Exception hierarchy.

Every error carries a stable ``code`` used by the CLI to pick an exit status:
validation problems map to 2, infeasibility/insolvency to 3.
"""


class ClearnetError(Exception):
    exit_code = 1


class ValidationError(ClearnetError):
    exit_code = 2


class SchemaError(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class NegativeLiability(ValidationError):
    pass


class NonzeroDiagonal(ValidationError):
    pass


class NegativeValue(ValidationError):
    """Negative external flow or nominal price."""


class NominalDefault(ValidationError):
    """The network already has banks without positive net worth at nominal prices."""


class EpsilonOutOfRange(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class InfeasibilityError(ClearnetError):
    exit_code = 3


class InsolventToExternal(InfeasibilityError):
    """The clearing LP is infeasible: some bank cannot cover its external debt.

    ``result`` holds the iterative maximal clearing vector with the insolvent
    banks flagged, so callers can still report something useful.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InfeasibleAtZero(InfeasibilityError):
    pass


class EpsilonExceedsBound(InfeasibilityError):
    pass


class NumericalFailure(ClearnetError):
    pass


class ConsistencyFailure(ClearnetError):
    pass


class MaxIterExceeded(ClearnetError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class TooManyVertices(ClearnetError):
    pass
