"""Exception hierarchy shared by every histq module."""


class HistqError(Exception):
    """Base class for all errors raised by histq."""


class DimensionMismatch(HistqError, ValueError):
    pass


class NonOrthonormalInput(HistqError, ValueError):
    pass


class NonIsometricPairs(HistqError, ValueError):
    pass


class NotNormalized(HistqError, ValueError):
    pass


class UnknownLabel(HistqError, KeyError):
    pass


class UnknownFactor(HistqError, KeyError):
    pass


class WrongArity(HistqError, ValueError):
    pass


class SpaceMismatch(HistqError, ValueError):
    pass


class UnknownTime(HistqError, KeyError):
    pass


class DuplicateStep(HistqError, ValueError):
    pass


class NonUnitaryStep(HistqError, ValueError):
    pass


class UnknownIndex(HistqError, KeyError):
    pass


class FamilyMismatch(HistqError, ValueError):
    pass


class InvariantViolation(HistqError, ValueError):
    pass


class ConditionOnNull(HistqError, ZeroDivisionError):
    pass


class InconsistentFamily(HistqError):
    """Probability requested on a family that fails the consistency check.

    ``witness`` holds the labels of the worst interfering pair and
    ``magnitude`` its ``|D(alpha, beta)|``.
    """

    def __init__(self, message, witness=None, magnitude=None):
        super().__init__(message)
        self.witness = witness
        self.magnitude = magnitude


class ScenarioError(HistqError):
    """Error located in scenario source text."""

    def __init__(self, message, line=None, col=None):
        self.message = message
        self.line = line
        self.col = col
        where = f"line {line}, col {col}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ScenarioSyntaxError(ScenarioError):
    pass


class UnknownReference(ScenarioError):
    pass


class ScenarioInvariantViolation(ScenarioError, InvariantViolation):
    pass


class ScenarioNonUnitaryStep(ScenarioError, NonUnitaryStep):
    pass
