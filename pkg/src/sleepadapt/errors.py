"""Exception hierarchy shared by all modules."""


class SleepAdaptError(Exception):
    """Base class for package errors."""


class ConfigError(SleepAdaptError, ValueError):
    """Invalid configuration or call contract (bad window, missing variable...)."""


class DataError(SleepAdaptError, ValueError):
    """Input data violate a precondition (non-monotone timestamps, too few rows...)."""


class DegenerateInputError(DataError):
    """Not enough distinct values to do the requested computation."""


class SingleClassError(DataError):
    """A two-class procedure received only one class (or a singleton class)."""


class FitError(SleepAdaptError, RuntimeError):
    """Model fitting failed to produce a usable estimate."""
