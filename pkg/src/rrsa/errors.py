"""Exception types raised by rrsa."""


class RRSAError(Exception):
    """Base class for all rrsa errors."""


class ConfigError(RRSAError, ValueError):
    """Invalid parameters or configuration (CLI exit code 2)."""


class DivergenceError(RRSAError, RuntimeError):
    """A simulation or SA run left the admissible region (CLI exit code 3)."""

    def __init__(self, message, step=None, level=None):
        super().__init__(message)
        self.step = step
        self.level = level
