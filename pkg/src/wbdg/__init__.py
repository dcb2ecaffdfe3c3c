"""Consensus decoding by a generator/verifier signalling game with a Wasserstein stopping rule."""

from ._accel import NUMBA_ENABLED, backend_name
from .candidates import (
    Candidate,
    CandidateSet,
    GroundMetric,
    build_candidate_set,
    canonicalize,
    cosine_distance_matrix,
    ground_metric,
)
from .core import (
    GameConfig,
    GeneratorStrategy,
    SignalLabel,
    Simplex,
    StoppingMode,
    VerifierStrategy,
    WinnerRule,
    normalize,
    preference_ordering,
    softmax_from_logits,
)
from .errors import (
    BDGError,
    InvalidSimplex,
    AllZero,
    NonFinite,
    ConfigError,
    EmptyAfterCanonicalization,
    NoValidCandidates,
    ZeroNormEmbedding,
    EmbeddingDimMismatch,
    DimensionMismatch,
    InfeasibleMarginals,
    TooLarge,
    NotGridRepresentable,
    ZeroColumn,
    TraceError,
    ParseError,
    SchemaError,
    InfeasibleGeometry,
    ScoringError,
    ScoringTimeout,
    ProtocolError,
    ServerError,
    InsufficientConvergence,
)
from .game import GameResult, GameTrace, InitScores, Termination, TraceRecord, initialize, run_game
from .transport import TransportPlan, wasserstein1, wasserstein1_cost, wasserstein1_oracle

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "NUMBA_ENABLED",
    "backend_name",
    "Candidate",
    "CandidateSet",
    "GroundMetric",
    "build_candidate_set",
    "canonicalize",
    "cosine_distance_matrix",
    "ground_metric",
    "GameConfig",
    "GeneratorStrategy",
    "SignalLabel",
    "Simplex",
    "StoppingMode",
    "VerifierStrategy",
    "WinnerRule",
    "normalize",
    "preference_ordering",
    "softmax_from_logits",
    "BDGError",
    "InvalidSimplex",
    "AllZero",
    "NonFinite",
    "ConfigError",
    "EmptyAfterCanonicalization",
    "NoValidCandidates",
    "ZeroNormEmbedding",
    "EmbeddingDimMismatch",
    "DimensionMismatch",
    "InfeasibleMarginals",
    "TooLarge",
    "NotGridRepresentable",
    "ZeroColumn",
    "TraceError",
    "ParseError",
    "SchemaError",
    "InfeasibleGeometry",
    "ScoringError",
    "ScoringTimeout",
    "ProtocolError",
    "ServerError",
    "InsufficientConvergence",
    "GameResult",
    "GameTrace",
    "InitScores",
    "Termination",
    "TraceRecord",
    "initialize",
    "run_game",
    "TransportPlan",
    "wasserstein1",
    "wasserstein1_cost",
    "wasserstein1_oracle",
]
