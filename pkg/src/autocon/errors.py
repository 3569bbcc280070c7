"""Exception hierarchy shared by every module in the package."""


class AutoconError(Exception):
    """Base class; the CLI turns these into one-line error messages."""

    kind = "error"


class DimensionError(AutoconError, ValueError):
    kind = "dimension"


class ParameterError(AutoconError, ValueError):
    kind = "parameter"


class DomainError(AutoconError, ValueError):
    kind = "domain"


class ContractError(AutoconError, RuntimeError):
    kind = "contract"


class DataError(AutoconError, ValueError):
    kind = "data"


class ConfigError(AutoconError, ValueError):
    kind = "config"


class DivergenceError(AutoconError, RuntimeError):
    kind = "divergence"
