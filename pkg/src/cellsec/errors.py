"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the mathematical domain of the requested operation."""


class ContractError(ValueError):
    """A caller violated an API contract (missing channels, empty inputs, ...)."""


class ResourceError(RuntimeError):
    """A sampling request would exceed the configured resource cap."""


class NumericsError(RuntimeError):
    """A numerical routine failed to converge to the requested tolerance.

    The ``achieved`` attribute carries the best error estimate available at the
    point of failure (or None when no estimate exists).
    """

    def __init__(self, message: str, achieved: float | None = None):
        super().__init__(message)
        self.achieved = achieved
