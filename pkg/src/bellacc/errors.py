"""Exception types shared across the package."""


class BellAccError(ValueError):
    """Base class for all errors raised by bellacc."""


class DegenerateInputError(BellAccError):
    """A statistic's denominator vanished."""


class MissingSettingError(BellAccError):
    """A count table lacks a setting required by the requested statistic."""

    def __init__(self, setting, message=None):
        self.setting = setting
        super().__init__(message or f"missing setting: {setting}")


class NegativeResultError(BellAccError):
    """Accidental subtraction would drive a count below zero."""

    def __init__(self, setting, value):
        self.setting = setting
        self.value = value
        super().__init__(f"subtraction gives negative count {value:g} at setting {setting}")


class PreconditionError(BellAccError):
    """Inputs violate an operation's stated preconditions."""


class InvalidSpecError(BellAccError):
    """A hidden-variable model returned out-of-range weights or responses."""


class InsufficientRatesError(BellAccError):
    """A rate-scaling study was given too few, or too narrowly spread, rates."""


class ConfigError(BellAccError):
    """A configuration value is invalid. ``key`` names the offending field."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
