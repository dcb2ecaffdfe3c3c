"""Generator/verifier decoding game with order-match and Wasserstein stopping."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .candidates import CandidateSet, GroundMetric
from .core import (
    GameConfig,
    GeneratorStrategy,
    Simplex,
    StoppingMode,
    VerifierStrategy,
    WinnerRule,
    normalize,
    preference_ordering,
    softmax_from_logits,
)
from .errors import AllZero, DimensionMismatch, NonFinite, ZeroColumn
from .kernels import update_generator_kernel, update_verifier_kernel
from .transport import wasserstein1


class Termination(str, enum.Enum):
    ORDER_MATCH = "OrderMatch"
    WASSERSTEIN_CONSENSUS = "WassersteinConsensus"
    MAX_ITERATIONS = "MaxIterations"


def _logprob_matrix(m, name: str) -> np.ndarray:
    a = np.array(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != 2 or a.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be n x 2, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite(f"{name} has non-finite entries")
    if np.any(a > 0):
        raise ValueError(f"{name} entries are log-probabilities and must be <= 0")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class InitScores:
    """Teacher-forced label log-probabilities, column 0 = correct.

    ``generator_logprob[i, s]`` scores candidate i under the prompt ending in
    label s; ``verifier_logprob[i, s]`` is the verifier's label score for i.
    """

    generator_logprob: np.ndarray
    verifier_logprob: np.ndarray

    def __post_init__(self):
        g = _logprob_matrix(self.generator_logprob, "generator_logprob")
        v = _logprob_matrix(self.verifier_logprob, "verifier_logprob")
        if g.shape != v.shape:
            raise DimensionMismatch(f"score shapes differ: {g.shape} vs {v.shape}")
        object.__setattr__(self, "generator_logprob", g)
        object.__setattr__(self, "verifier_logprob", v)

    @property
    def n(self) -> int:
        return self.generator_logprob.shape[0]


@dataclass(frozen=True, eq=False)
class GameState:
    iteration: int
    generator: GeneratorStrategy
    verifier: VerifierStrategy
    sigma_G_current: float
    sigma_V_current: float
    w1_current: float | None = None
    w1_weighted_current: float | None = None

    @classmethod
    def from_strategies(cls, t: int, g: GeneratorStrategy, v: VerifierStrategy) -> "GameState":
        sg, sv = sigma_separation(g, v)
        return cls(t, g, v, sg, sv)


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    generator_correct: tuple[float, ...]
    verifier_correct: tuple[float, ...]
    sigma_G: float
    sigma_V: float
    w1: float | None
    w1_weighted: float | None
    order_match: bool
    utility: float

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "generator_correct": list(self.generator_correct),
            "verifier_correct": list(self.verifier_correct),
            "sigma_G": self.sigma_G,
            "sigma_V": self.sigma_V,
            "w1": self.w1,
            "w1_weighted": self.w1_weighted,
            "order_match": self.order_match,
            "utility": self.utility,
        }


@dataclass(frozen=True)
class GameTrace:
    records: tuple[TraceRecord, ...] = ()

    def __len__(self) -> int:
        return len(self.records)

    def to_list(self) -> list[dict]:
        return [r.to_dict() for r in self.records]


@dataclass(frozen=True)
class GameResult:
    winner_index: int
    winner_text: str
    iterations_used: int
    termination: Termination
    trace: GameTrace = field(default_factory=GameTrace)
    final_generator: GeneratorStrategy | None = None
    final_verifier: VerifierStrategy | None = None


# ---------------------------------------------------------------------------
# single-step operations
# ---------------------------------------------------------------------------


def initialize(scores: InitScores) -> tuple[GeneratorStrategy, VerifierStrategy]:
    """Softmax over candidates per signal for G, over the two labels per candidate for V."""
    g = GeneratorStrategy(
        softmax_from_logits(scores.generator_logprob[:, 0]),
        softmax_from_logits(scores.generator_logprob[:, 1]),
    )
    v = np.empty_like(scores.verifier_logprob)
    for i, row in enumerate(scores.verifier_logprob):
        v[i] = softmax_from_logits(row).weights
    return g, VerifierStrategy(v)


def normalize_opponent_generator(g: GeneratorStrategy) -> np.ndarray:
    m = g.as_matrix()
    return m / m.sum(axis=0)


def normalize_opponent_verifier(v: VerifierStrategy) -> np.ndarray:
    """Column-normalise verifier scores so each label column is a distribution over candidates."""
    cols = v.probs.sum(axis=0)
    if np.any(cols <= 0):
        label = "correct" if cols[0] <= 0 else "incorrect"
        raise ZeroColumn(f"verifier assigns zero probability to '{label}' for every candidate")
    return v.probs / cols


def _checked(m: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(m)):
        raise NonFinite("strategy update produced non-finite values")
    return m


def update_generator(g: GeneratorStrategy, a_V: np.ndarray, t: int, cfg: GameConfig) -> GeneratorStrategy:
    if t < 1:
        raise ValueError(f"iteration index must be >= 1, got {t}")
    G = np.ascontiguousarray(g.as_matrix())
    aV = np.ascontiguousarray(a_V, dtype=np.float64)
    out = update_generator_kernel(G, aV, float(t), cfg.lambda_G, cfg.eta_G)
    return GeneratorStrategy.from_matrix(_checked(out))


def update_verifier(v: VerifierStrategy, a_G: np.ndarray, t: int, cfg: GameConfig) -> VerifierStrategy:
    if t < 1:
        raise ValueError(f"iteration index must be >= 1, got {t}")
    V = np.ascontiguousarray(v.probs)
    aG = np.ascontiguousarray(a_G, dtype=np.float64)
    out = update_verifier_kernel(V, aG, float(t), cfg.lambda_V, cfg.eta_V)
    return VerifierStrategy(_checked(out))


def sigma_separation(g: GeneratorStrategy, v: VerifierStrategy) -> tuple[float, float]:
    sg = float(np.min(np.abs(g.correct.weights - g.incorrect.weights)))
    sv = float(np.min(np.abs(v.probs[:, 0] - v.probs[:, 1])))
    return sg, sv


def verifier_correct_distribution(v: VerifierStrategy) -> Simplex:
    try:
        return normalize(v.p_correct)
    except AllZero:
        raise AllZero("verifier gives every candidate zero probability of being correct") from None


def _separated(state: GameState, cfg: GameConfig) -> bool:
    return state.sigma_G_current > cfg.sigma_G and state.sigma_V_current > cfg.sigma_V


def check_stop_classic(state: GameState, cfg: GameConfig) -> bool:
    if not _separated(state, cfg):
        return False
    p_G = state.generator.correct
    p_V = verifier_correct_distribution(state.verifier)
    return preference_ordering(p_G) == preference_ordering(p_V)


def check_stop_wasserstein(state: GameState, D: GroundMetric, cfg: GameConfig) -> tuple[bool, float, float]:
    p_G = state.generator.correct
    p_V = verifier_correct_distribution(state.verifier)
    w1, _ = wasserstein1(p_G, p_V, D)
    weighted = w1 / (state.sigma_V_current + cfg.epsilon)
    return (weighted < cfg.delta_W and _separated(state, cfg)), w1, weighted


def shared_utility(g: GeneratorStrategy, v: VerifierStrategy) -> float:
    """Fraction of the two signals on which G's and V's orderings agree (telemetry only)."""
    aV = normalize_opponent_verifier(v)
    agree = 0
    for s in range(2):
        if preference_ordering(g.as_matrix()[:, s]) == preference_ordering(aV[:, s]):
            agree += 1
    return 0.5 * agree


def select_winner(p_G: np.ndarray, p_V: np.ndarray, rule: WinnerRule) -> int:
    if rule is WinnerRule.GENERATOR:
        score = p_G
    elif rule is WinnerRule.VERIFIER:
        score = p_V
    else:
        score = 0.5 * (p_G + p_V)
    return int(np.argmax(score))  # first maximum, i.e. lowest index


# ---------------------------------------------------------------------------
# full game
# ---------------------------------------------------------------------------


def run_game(scores: InitScores, cset: CandidateSet, D: GroundMetric, cfg: GameConfig) -> GameResult:
    """Play the game until the configured criterion fires or ``max_iterations`` is reached.

    Iteration t evaluates the stopping rule on the t-th strategy pair and
    only then applies the simultaneous update, so a game that starts at
    consensus ends with ``iterations_used == 1``. Single-candidate sets skip
    the game and report zero iterations.
    """
    n = len(cset)
    if scores.n != n or D.n != n:
        raise DimensionMismatch(f"scores n={scores.n}, candidates n={n}, metric n={D.n}")
    if n == 1:
        return GameResult(0, cset[0].canonical_text, 0, Termination.ORDER_MATCH, GameTrace(()))

    wasserstein_mode = cfg.stopping_mode is StoppingMode.WASSERSTEIN
    g, v = initialize(scores)
    records = []
    termination = Termination.MAX_ITERATIONS
    t = 0
    for t in range(1, cfg.max_iterations + 1):
        state = GameState.from_strategies(t, g, v)
        p_G = g.correct.weights
        p_V = verifier_correct_distribution(v).weights
        order_match = preference_ordering(p_G) == preference_ordering(p_V)
        w1 = w1w = None
        if wasserstein_mode:
            stop, w1, w1w = check_stop_wasserstein(state, D, cfg)
        else:
            stop = order_match and _separated(state, cfg)
        records.append(
            TraceRecord(
                t,
                tuple(float(x) for x in p_G),
                tuple(float(x) for x in p_V),
                state.sigma_G_current,
                state.sigma_V_current,
                w1,
                w1w,
                order_match,
                shared_utility(g, v),
            )
        )
        if stop:
            termination = Termination.WASSERSTEIN_CONSENSUS if wasserstein_mode else Termination.ORDER_MATCH
            break
        if t == cfg.max_iterations:
            break
        a_V = normalize_opponent_verifier(v)
        a_G = normalize_opponent_generator(g)
        g, v = update_generator(g, a_V, t, cfg), update_verifier(v, a_G, t, cfg)

    p_G = g.correct.weights
    p_V = verifier_correct_distribution(v).weights
    winner = select_winner(p_G, p_V, cfg.winner_rule)
    return GameResult(
        winner,
        cset[winner].canonical_text,
        t,
        termination,
        GameTrace(tuple(records)),
        final_generator=g,
        final_verifier=v,
    )
