"""Exception hierarchy shared by all twinkernel modules."""


class TwinKernelError(Exception):
    """Base class for every error raised by this package."""


class PowerOverflowError(TwinKernelError, ValueError):
    """A group power exceeded the action's numerically stable range."""


class EmptyInputError(TwinKernelError, ValueError):
    pass


class DegenerateFitError(TwinKernelError, ValueError):
    """A log-log fit had no variation to fit."""


class ZeroMassError(TwinKernelError, ValueError):
    """A test set carries no design mass."""


class CarrierEscapeError(TwinKernelError, ValueError):
    """An operation produced a point outside the carrier."""


class NegativeLevelError(TwinKernelError, ValueError):
    pass


class ZeroDenominatorError(TwinKernelError, ArithmeticError):
    """No observation falls in the kernel support and no regularization is set."""


class LengthMismatchError(TwinKernelError, ValueError):
    pass


class ConfigError(TwinKernelError, ValueError):
    pass


class DataFormatError(TwinKernelError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
