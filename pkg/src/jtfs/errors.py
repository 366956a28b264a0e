"""Exception hierarchy shared by every module of the package."""


class JTFSError(Exception):
    """Base class for all errors raised by :mod:`jtfs`."""


class SizeError(JTFSError, ValueError):
    """An array length or shape does not fit the requested operation."""


class ResolutionError(JTFSError, ValueError):
    """A filter is too narrow to be represented on the requested grid."""


class ConfigurationError(JTFSError, ValueError):
    """Invalid hyperparameters."""


class IncompatibleError(JTFSError, ValueError):
    """Two coefficient sets do not share the same paths or shapes."""


class ConsistencyError(JTFSError, RuntimeError):
    """Internal stride bookkeeping went wrong."""


class StateError(JTFSError, RuntimeError):
    """Forward intermediates required by a backward pass are missing."""


class NumericError(JTFSError, ArithmeticError):
    """Non-finite values appeared during optimization."""


class FormatError(JTFSError, ValueError):
    """Unsupported or malformed file contents."""
