"""Exception types raised across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class PreconditionError(ValueError):
    """Caller violated an operation's precondition (e.g. action outside its box)."""


class ShapeError(ValueError):
    """Array of the wrong length or shape."""


class FormatError(ValueError):
    """Malformed or truncated file."""


class DegenerateGeometryError(ValueError):
    """Two agents share the same position, so no separation direction exists."""


class ConfigError(ValueError):
    """Invalid scenario or training configuration."""


class UsageError(ValueError):
    """Command-line request that names something that does not exist."""
