"""Exception hierarchy shared by every module."""


class GapCertError(Exception):
    """Base class for all errors raised by gapcert."""


class DetailedBalanceViolation(GapCertError):
    def __init__(self, pair, rel_error):
        self.pair = pair
        self.rel_error = rel_error
        super().__init__(
            f"detailed balance fails at pair {pair}: relative error {rel_error:.3e}"
        )


class SymmetryViolation(GapCertError):
    pass


class InvalidForm(GapCertError):
    pass


class InvalidParams(GapCertError):
    pass


class UnknownFixture(GapCertError):
    pass


class ZeroRates(GapCertError):
    pass


class NormalizationViolated(GapCertError):
    pass


class TooManyStates(GapCertError):
    pass


class SubsetTooLarge(TooManyStates):
    pass


class EmptySubset(GapCertError):
    pass


class DegenerateInput(GapCertError):
    pass


class DegenerateSubset(GapCertError):
    pass


class EigensolverNoConvergence(GapCertError):
    pass


class KillingPresent(GapCertError):
    pass


class InvalidM(GapCertError):
    pass


class BNotLargeEnough(GapCertError):
    pass


class NonpositiveGamma(GapCertError):
    pass


class NonpositiveDelta(GapCertError):
    pass


class SubsetNesting(GapCertError):
    pass


class InvalidP(GapCertError):
    pass


class ValidityViolated(GapCertError):
    pass


class DegeneratePhi(GapCertError):
    pass


class ExpressionOverflow(GapCertError):
    pass


class WindowOutOfRange(GapCertError):
    pass


class PreconditionViolated(GapCertError):
    pass


class UnsupportedStructure(GapCertError):
    """No exact or closed-form route exists for this form's graph."""


class SpecSyntaxError(GapCertError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        super().__init__(message + where)


class SpecValidationError(GapCertError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}, column {column})"
        super().__init__(message + where)


class ExpressionEvaluationError(GapCertError):
    pass


class IndeterminateProbe(GapCertError):
    """The integrability probe could not classify the series."""
