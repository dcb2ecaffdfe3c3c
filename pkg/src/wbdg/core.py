"""Probability simplices, strategy containers and game configuration."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import AllZero, ConfigError, InvalidSimplex, NonFinite

SIMPLEX_TOL = 1e-9


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class SignalLabel(enum.IntEnum):
    CORRECT = 0
    INCORRECT = 1


class StoppingMode(str, enum.Enum):
    CLASSIC = "classic"
    WASSERSTEIN = "wasserstein"


class WinnerRule(str, enum.Enum):
    AVERAGE = "average"
    GENERATOR = "generator"
    VERIFIER = "verifier"


@dataclass(frozen=True, eq=False)
class Simplex:
    """A point of the probability simplex over candidate indices.

    Inputs whose sum is within ``SIMPLEX_TOL`` of one are renormalised;
    anything further off is rejected.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).reshape(-1)
        if w.size < 1:
            raise InvalidSimplex("simplex needs at least one entry")
        if not np.all(np.isfinite(w)):
            raise NonFinite("simplex weights must be finite")
        if np.any(w < 0):
            raise InvalidSimplex(f"negative simplex weight {w.min()!r}")
        total = w.sum()
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise InvalidSimplex(f"simplex weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", _frozen(w / total))

    def __len__(self) -> int:
        return self.weights.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.weights if dtype is None else self.weights.astype(dtype)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Simplex):
            return NotImplemented
        return np.array_equal(self.weights, other.weights)

    def __repr__(self) -> str:
        return f"Simplex({np.array2string(self.weights, precision=6)})"


def normalize(raw: Sequence[float] | np.ndarray) -> Simplex:
    """Scale a non-negative vector onto the simplex."""
    w = np.asarray(raw, dtype=np.float64).reshape(-1)
    if w.size < 1:
        raise InvalidSimplex("cannot normalize an empty vector")
    if not np.all(np.isfinite(w)):
        raise NonFinite("cannot normalize non-finite entries")
    if np.any(w < 0):
        raise InvalidSimplex("cannot normalize negative entries")
    total = w.sum()
    if total <= 0:
        raise AllZero("every entry is zero")
    return Simplex(w / total)


def softmax_from_logits(logits: Sequence[float] | np.ndarray) -> Simplex:
    """Max-shifted softmax, stable for logits of any magnitude."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if z.size < 1:
        raise InvalidSimplex("softmax of an empty vector")
    if not np.all(np.isfinite(z)):
        raise NonFinite("logits must be finite")
    with np.errstate(over="ignore"):
        e = np.exp(z - z.max())
    return Simplex(e / e.sum())


def preference_ordering(s: Simplex | np.ndarray) -> tuple[int, ...]:
    """Candidate indices by descending weight; ties go to the lower index."""
    w = np.asarray(s, dtype=np.float64)
    return tuple(int(i) for i in np.lexsort((np.arange(w.shape[0]), -w)))


@dataclass(frozen=True)
class GeneratorStrategy:
    correct: Simplex
    incorrect: Simplex

    def __post_init__(self):
        if len(self.correct) != len(self.incorrect):
            raise InvalidSimplex(
                f"signal distributions differ in length: {len(self.correct)} vs {len(self.incorrect)}"
            )

    @property
    def n(self) -> int:
        return len(self.correct)

    def as_matrix(self) -> np.ndarray:
        """n x 2 matrix, column 0 = correct signal."""
        return np.column_stack([self.correct.weights, self.incorrect.weights])

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "GeneratorStrategy":
        m = np.asarray(m, dtype=np.float64)
        return cls(Simplex(m[:, 0]), Simplex(m[:, 1]))


@dataclass(frozen=True, eq=False)
class VerifierStrategy:
    """Per-candidate (p_correct, p_incorrect) rows."""

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64)
        if p.ndim != 2 or p.shape[1] != 2 or p.shape[0] < 1:
            raise InvalidSimplex(f"verifier strategy must be n x 2, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise NonFinite("verifier probabilities must be finite")
        if np.any(p < 0):
            raise InvalidSimplex("negative verifier probability")
        sums = p.sum(axis=1)
        bad = np.abs(sums - 1.0) > SIMPLEX_TOL
        if np.any(bad):
            i = int(np.argmax(bad))
            raise InvalidSimplex(f"verifier row {i} sums to {sums[i]!r}")
        object.__setattr__(self, "probs", _frozen(p / sums[:, None]))

    @property
    def n(self) -> int:
        return self.probs.shape[0]

    @property
    def p_correct(self) -> np.ndarray:
        return self.probs[:, 0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, VerifierStrategy):
            return NotImplemented
        return np.array_equal(self.probs, other.probs)


def _positive(name: str, value: float) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be finite and > 0, got {value!r}")
    return value


def _positive_int(name: str, value: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        else:
            raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise ConfigError(f"{name} must be >= 1, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class GameConfig:
    """Hyperparameters of one decoding game.

    Defaults are the published experimental setting; ``epsilon`` is not
    published and is set well below any separation the gate can accept.
    """

    lambda_G: float = 0.4
    lambda_V: float = 0.4
    eta_G: float = 0.4
    eta_V: float = 0.4
    sigma: float = 0.005
    delta_W: float = 0.2
    epsilon: float = 1e-8
    max_iterations: int = 500
    n_candidates: int = 8
    max_sampling_calls: int = 16
    temperatures: tuple[float, ...] = (0.5, 1.0)
    stopping_mode: StoppingMode = StoppingMode.WASSERSTEIN
    winner_rule: WinnerRule = WinnerRule.AVERAGE

    def __post_init__(self):
        for name in ("lambda_G", "lambda_V", "eta_G", "eta_V", "sigma", "delta_W", "epsilon"):
            object.__setattr__(self, name, _positive(name, getattr(self, name)))
        for name in ("max_iterations", "n_candidates", "max_sampling_calls"):
            object.__setattr__(self, name, _positive_int(name, getattr(self, name)))
        if self.n_candidates > self.max_sampling_calls:
            raise ConfigError(
                f"n_candidates ({self.n_candidates}) exceeds max_sampling_calls ({self.max_sampling_calls})"
            )
        temps = self.temperatures
        if isinstance(temps, (int, float)):
            temps = (temps,)
        temps = tuple(_positive("temperature", t) for t in temps)
        if not temps:
            raise ConfigError("at least one sampling temperature is required")
        object.__setattr__(self, "temperatures", temps)
        try:
            object.__setattr__(self, "stopping_mode", StoppingMode(self.stopping_mode))
        except ValueError:
            raise ConfigError(f"unknown stopping_mode {self.stopping_mode!r}") from None
        try:
            object.__setattr__(self, "winner_rule", WinnerRule(self.winner_rule))
        except ValueError:
            raise ConfigError(f"unknown winner_rule {self.winner_rule!r}") from None

    # one configured value, read through separate names by the gate checks
    @property
    def sigma_G(self) -> float:
        return self.sigma

    @property
    def sigma_V(self) -> float:
        return self.sigma

    def with_overrides(self, overrides: Mapping[str, Any] | None = None, **kwargs) -> "GameConfig":
        merged = dict(overrides or {})
        merged.update(kwargs)
        known = {f.name for f in fields(self)}
        unknown = sorted(set(merged) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return replace(self, **merged)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, enum.Enum):
                v = v.value
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "GameConfig":
        return cls().with_overrides(data)
