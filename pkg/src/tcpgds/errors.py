"""Exception types raised by the package."""


class TcpInputError(ValueError):
    """Malformed input data: wrong dimensions, bad files, unknown names."""


class ConfigurationError(ValueError):
    """Invalid solver or activation parameters."""
