"""Exception types shared across the package.

All of them subclass ``ValueError`` so callers that only care about bad input
can catch that, while the CLI maps each kind to its own exit status.
"""


class QRCError(ValueError):
    """Base class for every error raised on purpose by this package."""


class DimensionError(QRCError):
    """Operands have incompatible shapes or subsystem dimensions."""


class ContractError(QRCError):
    """A numerical precondition (unitarity, hermiticity, CPTP, ...) failed."""


class InputDomainError(QRCError):
    """An input value lies outside the domain the dynamics are defined on."""


class UndefinedMetricError(QRCError):
    """A metric was requested on data for which it is not defined."""


class ConfigError(QRCError):
    """An experiment configuration is invalid; ``field`` names the offending key."""

    def __init__(self, message: str, field: str = ""):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)
