"""Exception hierarchy.

Every error raised on purpose by the package derives from ``AlienError`` so the
CLI can turn it into a machine-readable failure with the class name as code.
"""


class AlienError(Exception):
    """Base class for all package errors."""

    @property
    def code(self):
        return type(self).__name__


# geometry
class OverlappingCells(AlienError):
    pass


class DisconnectedShape(AlienError):
    pass


class InvalidAngle(AlienError):
    pass


class PartBudgetExceeded(AlienError):
    pass


class UniverseCapExceeded(AlienError):
    pass


# concept language
class ProgramSyntaxError(AlienError):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnboundVariable(AlienError):
    pass


class ArityError(AlienError):
    pass


class IllTypedProgram(AlienError):
    pass


class NoTerminalAlternative(AlienError):
    pass


class EvaluationBudgetExceeded(AlienError):
    pass


# inference
class UnknownFigure(AlienError):
    pass


class AllZeroWeights(AlienError):
    pass


class EnumerationBudgetExceeded(AlienError):
    pass


# fitting
class OutOfRange(AlienError):
    pass


class MissingPool(AlienError):
    pass


class MissingData(AlienError):
    pass


class DegenerateData(AlienError):
    pass


# baselines
class NoParse(AlienError):
    pass


class DimensionMismatch(AlienError):
    pass


class ZeroVector(AlienError):
    pass


class MissingFeature(AlienError):
    pass


# harness
class SchemaError(AlienError):
    pass


class UnknownPrimitive(AlienError):
    pass


class InvalidFigure(AlienError):
    pass


class ConstantVector(AlienError):
    pass
