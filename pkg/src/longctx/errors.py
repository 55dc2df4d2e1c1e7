"""Exception types raised across the package."""


class LongCtxError(ValueError):
    """Base class for invalid inputs and configurations."""


class InvalidDimensionError(LongCtxError):
    """Head dimension is not a positive even integer (or not a multiple of 16 for M-RoPE)."""


class InvalidBaseError(LongCtxError):
    """Rotary base is not strictly positive."""


class DimensionMismatchError(LongCtxError):
    """Vector or matrix shapes disagree."""


class ConfigurationError(LongCtxError):
    """Inconsistent configuration (layout vs basis, empty tables, bad harness config)."""


class InvalidExtensionError(LongCtxError):
    """Extension scale below 1, or target length shorter than the original."""


class InvalidScheduleError(LongCtxError):
    """Stage lengths are empty or not strictly increasing."""


class InvalidInputError(LongCtxError):
    """Non-positive counts, durations or empty inputs."""


class MissingSampleError(KeyError):
    """A pack refers to a sample id that was not supplied."""
