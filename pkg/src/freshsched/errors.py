"""Exception hierarchy.

Input-side problems (bad files, bad configs, malformed tables) derive from
:class:`InputError`; everything else that goes wrong while computing derives
from :class:`ComputationError`.  The CLI maps the two families to exit codes
2 and 1.
"""


class FreshSchedError(Exception):
    pass


class InputError(FreshSchedError, ValueError):
    pass


class ComputationError(FreshSchedError):
    pass


class UnsupportedLossError(InputError):
    pass


class AlphabetMismatchError(InputError):
    pass


class SupportError(ComputationError):
    pass


class AbsoluteContinuityError(ComputationError):
    pass


class InsufficientDataError(ComputationError):
    def __init__(self, theta, msg=None):
        self.theta = theta
        super().__init__(msg or f"no valid windows for theta={theta}")


class PenaltyFormatError(InputError):
    pass


class TruncationError(InputError):
    pass


class ConfigurationError(InputError):
    pass


class UnreachableThresholdError(ComputationError):
    pass


class ConvergenceError(ComputationError):
    pass


class MisuseError(InputError):
    pass
