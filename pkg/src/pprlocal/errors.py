"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: parameter errors exit 2,
data errors exit 3, transport errors exit 4.
"""


class PprLocalError(Exception):
    """Base class for all package errors."""


class ParameterError(PprLocalError, ValueError):
    """An argument is outside its documented domain."""


class DataError(PprLocalError, ValueError):
    """Input data violates a structural contract (malformed file, bad graph)."""


class ParseError(DataError):
    """A text input could not be parsed; message carries the line number."""


class NumericalError(PprLocalError, ArithmeticError):
    """A numerical routine failed to produce a usable result."""


class TransportError(PprLocalError, IOError):
    """A remote graph query failed after exhausting retries."""


class TransportSuspended(TransportError):
    """A crawl was suspended; a checkpoint was written and the run can resume.

    ``checkpoint_path`` is the file to pass back to ``crawl_ppr`` to continue.
    """

    def __init__(self, message: str, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
