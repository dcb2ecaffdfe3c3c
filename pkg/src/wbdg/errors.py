"""Exception hierarchy shared by every module."""


class BDGError(Exception):
    """Base class for all errors raised by this package."""


# numeric foundations
class InvalidSimplex(BDGError, ValueError):
    pass


class AllZero(InvalidSimplex):
    pass


class NonFinite(BDGError, ValueError):
    pass


class ConfigError(BDGError, ValueError):
    pass


# candidate construction
class EmptyAfterCanonicalization(BDGError, ValueError):
    pass


class NoValidCandidates(BDGError, ValueError):
    pass


class ZeroNormEmbedding(BDGError, ValueError):
    pass


class EmbeddingDimMismatch(BDGError, ValueError):
    pass


# transport
class DimensionMismatch(BDGError, ValueError):
    pass


class InfeasibleMarginals(BDGError, ValueError):
    pass


class TooLarge(BDGError, ValueError):
    pass


class NotGridRepresentable(BDGError, ValueError):
    pass


# game
class ZeroColumn(BDGError, ValueError):
    pass


# scorer backends
class TraceError(BDGError):
    pass


class ParseError(TraceError):
    pass


class SchemaError(TraceError):
    def __init__(self, message, instance_id=None, path=None):
        where = []
        if instance_id is not None:
            where.append(f"instance {instance_id!r}")
        if path:
            where.append(f"at {path}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)
        self.instance_id = instance_id
        self.path = path


class InfeasibleGeometry(BDGError, ValueError):
    pass


class ScoringError(BDGError):
    def __init__(self, message, candidate=None, condition=None, role=None):
        super().__init__(message)
        self.candidate = candidate
        self.condition = condition
        self.role = role


class ScoringTimeout(ScoringError):
    pass


class ProtocolError(ScoringError):
    pass


class ServerError(ScoringError):
    pass


# harness
class InsufficientConvergence(BDGError):
    def __init__(self, message, converged_fraction=None):
        super().__init__(message)
        self.converged_fraction = converged_fraction
