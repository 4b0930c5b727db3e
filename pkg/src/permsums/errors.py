"""Exception types shared across the package.

The CLI maps these onto process exit codes, so library code should raise
them rather than bare ``ValueError``/``RuntimeError`` where the distinction
matters to a caller.
"""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class CapacityError(RuntimeError):
    """The request is well posed but exceeds a configured engine capacity."""


class ResourceError(RuntimeError):
    """A sampler ran out of its attempt budget (e.g. rejection sampling)."""
