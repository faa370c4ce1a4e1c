"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition or invariant."""


class CapExceededError(RuntimeError):
    """Raised when an enumeration would exceed a configured size cap."""
