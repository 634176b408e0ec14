"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid simulation configuration (unknown key, bad value, bad combination)."""


class DataFormatError(ValueError):
    """Malformed constellation CSV or alist parity-check file."""
