class LatentProbeError(Exception):
    """Base class for all library errors."""


class InputError(LatentProbeError, ValueError):
    """Bad input: malformed files, violated preconditions, out-of-range arguments."""


class ComputationError(LatentProbeError, ArithmeticError):
    """The input is valid but the requested quantity is undefined for it."""
