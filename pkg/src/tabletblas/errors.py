"""Exception hierarchy shared by the store, the kernels and the algorithms."""


class TabletError(Exception):
    """Base class for every error raised by this package."""


class NotFoundError(TabletError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class NameConflictError(TabletError):
    pass


class ConfigurationError(TabletError, ValueError):
    pass


class ParameterError(TabletError, ValueError):
    pass


class DataFormatError(TabletError, ValueError):
    pass


class InternalOrderError(TabletError):
    """An input stream that should be sorted went backwards."""


class CollisionError(TabletError):
    pass


class ValidationError(TabletError, ValueError):
    pass


class DataConsistencyError(TabletError):
    pass


class ResourceError(TabletError):
    """A configured memory guard was exceeded.

    ``metrics`` carries whatever partial measurements were available when
    the guard tripped (may be ``None``).
    """

    def __init__(self, message, metrics=None):
        super().__init__(message)
        self.metrics = metrics


class IteratorFailure(TabletError):
    """A user function inside an iterator raised; ``key`` names the entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
