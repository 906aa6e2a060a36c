"""Exception hierarchy.

Every error carries the process exit code used by the command line front end.
"""


class KMWaveError(Exception):
    exit_code = 1


class ArgumentError(KMWaveError, ValueError):
    exit_code = 2


class ConfigError(ArgumentError):
    """Invalid experiment configuration; ``kind`` names the failed check."""

    exit_code = 2

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


class ConvergenceError(KMWaveError):
    exit_code = 3


class DivergenceError(ConvergenceError):
    pass


class BracketingError(ConvergenceError):
    pass


class PositivityError(KMWaveError):
    """A state component went negative beyond round-off; the step is too large."""

    exit_code = 3


class StepSizeError(PositivityError):
    pass


class PreconditionError(KMWaveError):
    exit_code = 4


class InconsistentShiftError(PreconditionError):
    pass


class GadgetInfeasibleError(PreconditionError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report or {}


class DomainExhaustedError(KMWaveError):
    exit_code = 5


class NoFrontError(KMWaveError):
    exit_code = 4
