"""Exception types raised across the package."""


class DepthPoseError(Exception):
    """Base class for all package errors."""


class NonPositiveDepth(DepthPoseError, ValueError):
    pass


class NonFiniteInput(DepthPoseError, ValueError):
    pass


class MissingRates(DepthPoseError, ValueError):
    pass


class SingularInnovation(DepthPoseError, ArithmeticError):
    pass


class UnknownPoint(DepthPoseError, KeyError):
    pass


class MalformedMessage(DepthPoseError, ValueError):
    pass


class ConfigError(DepthPoseError, ValueError):
    """Invalid scenario configuration; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


class IoError(DepthPoseError, OSError):
    pass
