class NearPerfectError(Exception):
    def __init__(self, message: str):
        super().__init__(message)

    @property
    def message(self) -> str:
        return self.args[0]


class RangeError(NearPerfectError, ValueError):
    """A range, segment or parameter precondition does not hold."""


class SigmaOverflowError(NearPerfectError, ArithmeticError):
    """A divisor sum does not fit the result width."""


class InvalidExponentError(NearPerfectError, ValueError):
    """An exponent that must be prime is not."""


class CapExceededError(NearPerfectError, ValueError):
    """Input above the configured pseudoperfect cap."""


class NotPerfectError(NearPerfectError, ValueError):
    """The argument was expected to be an even perfect number."""


class VerificationError(NearPerfectError):
    """A generated construction was refuted by the classifier."""


class CheckpointError(NearPerfectError):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class ConfigMismatchError(CheckpointError):
    pass


class CheckpointBusyError(CheckpointError):
    pass
