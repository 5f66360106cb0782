"""Exception types shared across the simulator."""


class InvalidInputError(ValueError):
    """An argument violates an operation's precondition."""


class ConfigError(ValueError):
    """A configuration is malformed or outside supported limits."""


class InvariantError(AssertionError):
    """An internal invariant failed to hold at runtime."""
