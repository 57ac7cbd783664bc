"""Exception hierarchy shared by every module."""


class StarkforgeError(Exception):
    pass


class PoleAtNonPositiveInteger(StarkforgeError):
    pass


class DomainError(StarkforgeError, ValueError):
    pass


class ConvergenceError(StarkforgeError):
    pass


class InvalidDiscriminant(StarkforgeError, ValueError):
    pass


class SchemaError(StarkforgeError):
    pass


class ConsistencyError(StarkforgeError):
    pass


class UnsupportedDegree(StarkforgeError):
    pass


class DegenerateIdeal(StarkforgeError):
    pass


class MissingReflexData(StarkforgeError):
    pass


class InvalidPolarization(StarkforgeError, ValueError):
    pass


class NotIntegral(StarkforgeError, ValueError):
    pass


class LatticePointError(StarkforgeError, ValueError):
    pass


class PoleError(StarkforgeError):
    pass


class ExtrapolationUnstable(StarkforgeError):
    pass


class NotTotallyPositive(StarkforgeError, ValueError):
    pass


class CutoffTooSmall(StarkforgeError):
    pass


class NotUniform(StarkforgeError):
    pass


class LedgerMiss(StarkforgeError, KeyError):
    pass


class PrecisionInsufficient(StarkforgeError):
    pass


class NoRelationFound(StarkforgeError):
    pass


class OrbitMismatch(StarkforgeError):
    pass


class RankDeficient(StarkforgeError):
    pass
