"""Exception hierarchy shared by every pipeline stage."""


class FxError(Exception):
    """Base class for all errors raised by fxsynth."""


class FxDomainError(FxError, ValueError):
    """Argument outside the mathematical domain of an operation (e.g. ufp(0))."""


class FxOverflowError(FxError, OverflowError):
    """A mantissa does not fit its declared format or the 64-bit working width."""


class ModelError(FxError, ValueError):
    pass


class ModelParseError(ModelError):
    pass


class ShapeMismatchError(ModelError):
    pass


class NonFiniteError(ModelError):
    pass


class MissingRangeError(ModelError):
    pass


class DimensionError(FxError, ValueError):
    """Input vector length does not match the model."""


class ConfigError(FxError, ValueError):
    pass


class IterationLimitError(FxError, RuntimeError):
    """Branch-and-bound exhausted its node budget."""


class LPFormatError(FxError, ValueError):
    pass


class EmitError(FxError, RuntimeError):
    pass
