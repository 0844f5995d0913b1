"""Exception hierarchy shared by the library and the command line."""


class AesnError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(AesnError, ValueError):
    """Invalid run configuration, search space or hyperparameters."""


class DataError(AesnError, ValueError):
    """Malformed, incomplete or inconsistent input data."""


class NumericalError(AesnError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class ConvergenceError(NumericalError):
    """An iterative method hit its iteration budget before converging."""
