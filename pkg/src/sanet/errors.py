"""Exception hierarchy shared by every subpackage."""


class SanetError(Exception):
    """Base class for library errors."""


class EmptyInput(SanetError, ValueError):
    pass


class DuplicateVertex(SanetError, ValueError):
    pass


class OrderOutOfRange(SanetError, IndexError):
    pass


class DimensionMismatch(SanetError, ValueError):
    pass


class ShapeMismatch(DimensionMismatch):
    pass


class EigenFailure(SanetError, RuntimeError):
    pass


class EpsilonOutOfRange(SanetError, ValueError):
    pass


class NonScalarLoss(SanetError, ValueError):
    pass


class EmptyMask(SanetError, ValueError):
    pass


class EmptyNeighborhood(SanetError, ValueError):
    pass


class DegenerateTriangulation(SanetError, ValueError):
    pass


class DisconnectedAfterHolePunch(SanetError, ValueError):
    pass


class ParseError(SanetError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class FingerprintMismatch(SanetError, ValueError):
    pass


class DivergedLoss(SanetError, ArithmeticError):
    pass


class ConfigError(SanetError, ValueError):
    pass
