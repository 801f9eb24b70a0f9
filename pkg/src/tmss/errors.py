"""Exception hierarchy shared by all solver modules."""


class TMSSError(Exception):
    """Base class for all package errors."""


class InvalidArgument(TMSSError, ValueError):
    pass


class OutOfRange(TMSSError, IndexError):
    pass


class UnsupportedRegime(TMSSError, ValueError):
    """Parameters outside the squeezing regime |xi2| > |xi1| > 0."""


class NumericalFailure(TMSSError, RuntimeError):
    pass


class StepSizeTooLarge(NumericalFailure):
    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ConvergenceFailure(NumericalFailure):
    def __init__(self, message, last_delta=None, report=None):
        super().__init__(message)
        self.last_delta = last_delta
        self.report = report
