"""Exception hierarchy shared by every module."""


class CVVerifyError(Exception):
    """Base class. ``exit_code`` is what the CLI returns for this error."""

    exit_code = 3


class ConfigError(CVVerifyError, ValueError):
    exit_code = 2


class NumericError(CVVerifyError, ArithmeticError):
    exit_code = 3


class TailTooLarge(NumericError):
    pass


class MixedTruncation(ConfigError):
    pass


class ShapeMismatch(ConfigError):
    pass


class BadSpec(ConfigError):
    pass


class BadArity(BadSpec):
    pass


class ConstraintViolated(ConfigError):
    pass


class BadDistribution(ConfigError):
    pass


class BadRange(ConfigError):
    pass


class DegenerateFit(NumericError):
    pass
