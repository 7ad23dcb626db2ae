"""Exception hierarchy shared by every stage of the pipeline."""


class MomentInvarError(Exception):
    """Base class for all errors raised by momentinvar."""


class DenominatorZero(MomentInvarError, ZeroDivisionError):
    """A rational function was evaluated where its denominator vanishes."""


class ParseError(MomentInvarError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(f"{where}{message}")
        self.bare_message = message


class ModelError(MomentInvarError):
    """The program is syntactically fine but is not a Prob-solvable loop."""

    def __init__(self, message, line=None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{type(self).__name__}: {prefix}{message}")


class DuplicateAssignment(ModelError):
    pass


class Uninitialized(ModelError):
    pass


class NonlinearSelf(ModelError):
    pass


class ForwardReference(ModelError):
    pass


class StatefulSelfCoefficient(ModelError):
    pass


class VariableInDistribution(ModelError):
    pass


class ProbabilityOutOfRange(ModelError):
    pass


class UnsupportedCondition(ModelError):
    pass


class InvalidSupport(MomentInvarError):
    pass


class InfiniteSupport(MomentInvarError):
    pass


class StateExplosion(MomentInvarError):
    pass


class BoundExceeded(MomentInvarError):
    """More monomials were processed than the termination bound permits."""


class OrderingViolation(MomentInvarError):
    """A recurrence referenced a monomial that is not strictly smaller."""


class MissingMoment(MomentInvarError):
    pass


class ZeroVariance(MomentInvarError):
    pass
