"""Exception types shared across the toolkit."""


class ShapkitError(Exception):
    """Base class for every error raised by shapkit."""


class DimensionError(ShapkitError, ValueError):
    pass


class ConfigError(ShapkitError, ValueError):
    pass


class EnumerationLimitError(ShapkitError, ValueError):
    """Raised when exact enumeration would exceed the coalition cap."""


class DegenerateDesignError(ShapkitError, ValueError):
    pass


class TransportError(ShapkitError, RuntimeError):
    """The external model process died, timed out or closed its pipe."""


class ProtocolError(ShapkitError, RuntimeError):
    """The external model answered with something that is not a valid response."""


class DataError(ShapkitError, ValueError):
    pass
