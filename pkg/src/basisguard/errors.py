"""Exception hierarchy shared by all basisguard modules."""


class BasisGuardError(Exception):
    """Base class for every error raised by the toolkit."""


class NonFiniteInput(BasisGuardError, ValueError):
    pass


class ChannelMismatch(BasisGuardError, ValueError):
    pass


class TooManyLevels(BasisGuardError, ValueError):
    pass


class EmptyBand(BasisGuardError, ValueError):
    pass


class RankOutOfRange(BasisGuardError, ValueError):
    pass


class BadQuality(BasisGuardError, ValueError):
    pass


class ShapeMismatch(BasisGuardError, ValueError):
    pass


class BadLabel(BasisGuardError, ValueError):
    pass


class EmptyDataset(BasisGuardError, ValueError):
    pass


class BadCheckpoint(BasisGuardError, ValueError):
    pass


class ZeroNormImage(BasisGuardError, ValueError):
    pass


class EmptyBatch(BasisGuardError, ValueError):
    pass


class ConfigError(BasisGuardError, ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class TapeConsumed(BasisGuardError, RuntimeError):
    """A gradient tape was replayed after its backward pass already ran."""
