"""Exception hierarchy shared by all toolkit modules.

The CLI maps :class:`ConfigError` to exit code 2 and every other
:class:`HatescanError` to exit code 1.
"""


class HatescanError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(HatescanError):
    """Invalid configuration, missing input file or missing credentials."""


class DataError(HatescanError):
    """Malformed or inconsistent input data."""


class ParameterError(HatescanError, ValueError):
    """An argument lies outside its documented domain."""


class StratificationError(DataError):
    """A class is too small to be stratified."""


class ConvergenceError(HatescanError):
    """The optimizer could not make progress."""

    def __init__(self, message, x=None, f=None, iterations=0):
        super().__init__(message)
        self.x = x
        self.f = f
        self.iterations = iterations


class UnsupportedOperation(HatescanError):
    """The model does not support the requested operation."""


class ReplayMiss(DataError):
    """A replay store has no response for a request."""

    def __init__(self, request_hash, operation=""):
        super().__init__(f"replay store has no entry for {operation} request {request_hash}")
        self.request_hash = request_hash
