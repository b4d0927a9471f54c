"""Exception hierarchy.

Every failure raised by the library derives from :class:`CmaError`, so callers
(and the CLI) can catch one type. Subclasses also inherit from the closest
builtin so ``except ValueError`` keeps working.
"""


class CmaError(Exception):
    """Base class for all library errors."""


class ZeroVector(CmaError, ValueError):
    pass


class DimensionMismatch(CmaError, ValueError):
    pass


class EmptyInput(CmaError, ValueError):
    pass


class NonFinite(CmaError, ValueError):
    pass


class DegenerateBatch(CmaError, ValueError):
    pass


class NonFiniteSimilarity(NonFinite):
    pass


class InvalidSpec(CmaError, ValueError):
    pass


class InsufficientData(CmaError, ValueError):
    pass


class EtaOutOfRange(CmaError, ValueError):
    pass


class EmptyIdSet(EmptyInput):
    pass


class EmptyNegativeSet(EmptyInput):
    pass


class TooManyGroups(CmaError, ValueError):
    pass


class EmptyPairPopulation(CmaError, ValueError):
    pass


class SizeMismatch(CmaError, ValueError):
    pass


class NoCompetitors(CmaError, ValueError):
    pass


class BadMagic(CmaError, ValueError):
    pass


class TruncatedPayload(CmaError, ValueError):
    pass


class UnsupportedVersion(CmaError, ValueError):
    pass


class IoFailure(CmaError, OSError):
    pass


class ConfigError(CmaError, ValueError):
    pass
