"""Exception hierarchy shared by every module."""


class WeakDetectError(Exception):
    """Base class for all library errors."""


class DomainError(WeakDetectError, ValueError):
    """An abundance or observation lies outside the model's valid domain."""


class ContractError(WeakDetectError, ValueError):
    """A precondition on shapes, weights or parameters was violated."""


class NumericError(WeakDetectError, ArithmeticError):
    """A computation produced a non-finite value."""


class ConfigError(WeakDetectError, ValueError):
    """An experiment configuration failed validation."""
