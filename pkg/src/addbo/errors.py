"""Exception types shared across the package."""


class AddboError(Exception):
    """Base class for package errors."""


class ConfigError(AddboError):
    """Bad configuration file, key, or value."""


class CapacityError(AddboError):
    """A table, domain, or clique exceeds a configured capacity cap."""


class NumericalError(AddboError):
    """A matrix factorization or likelihood evaluation failed numerically."""


class InconsistencyError(AddboError):
    """An internal invariant was violated (e.g. incomplete term coverage)."""
