"""Exceptions raised across the package."""


class ShiftError(Exception):
    """Base class for all package errors."""


class UnknownState(ShiftError):
    pass


class Inadmissible(ShiftError):
    pass


class NoCycleReachable(ShiftError):
    pass


class RangeTooLarge(ShiftError):
    pass


class Diverging(ShiftError):
    """Green partial sums grow with ratios >= 1 over the trailing window."""

    def __init__(self, message, partial=None, ratios=None):
        super().__init__(message)
        self.partial = partial
        self.ratios = ratios or []


class BudgetExhausted(ShiftError):
    """No certificate was reached before the term cap."""

    def __init__(self, message, partial=None, ratios=None):
        super().__init__(message)
        self.partial = partial
        self.ratios = ratios or []


class MismatchedTestSet(ShiftError):
    pass


class NotEscaping(ShiftError):
    pass


class NotCauchy(ShiftError):
    pass


class NotExcessive(ShiftError):
    def __init__(self, message, violations=None):
        super().__init__(message)
        self.violations = violations or {}


class ZeroMassConditioning(ShiftError):
    pass


class NotHarmonic(ShiftError):
    pass


class SamplerDegenerate(ShiftError):
    pass


class ModelFileError(ShiftError):
    """Malformed model file; carries the offending line and field."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field
