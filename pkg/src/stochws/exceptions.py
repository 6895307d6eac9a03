"""Exception hierarchy shared by every stage of the toolkit."""


class StochWSError(Exception):
    """Base class for all errors raised by :mod:`stochws`."""


class ConfigError(StochWSError, ValueError):
    """Invalid parameters or configuration."""


class DataError(StochWSError, ValueError):
    """Input data that cannot be decoded or violates a data invariant."""


class DegenerateError(StochWSError, ValueError):
    """A stage produced an empty or degenerate result downstream cannot use."""
