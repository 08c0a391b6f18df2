class BRWLabError(Exception):
    """
    Base class for every error raised on purpose by this package.
    """


class DomainError(BRWLabError, ValueError):
    """
    An argument lies outside the domain of an operation (negative step-function values,
    sets touching the origin, u < 0 for a Laplace transform, and so on).
    """


class ResourceError(BRWLabError, RuntimeError):
    """
    A configured cap was exceeded. Partial metadata is kept in `info` so that callers
    (the replicate driver in particular) can report where the run stopped.
    """

    def __init__(self, message, **info):
        super().__init__(message)
        self.info = info


class ConfigError(BRWLabError, ValueError):
    """
    The experiment configuration is invalid.
    """


# Process exit codes of main.py.
EXIT_OK = 0
EXIT_CRITERION_FAILED = 1
EXIT_CONFIG_ERROR = 2
EXIT_RESOURCE_ERROR = 3
