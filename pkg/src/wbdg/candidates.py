"""Candidate-set construction: canonical answer strings and the cosine ground metric."""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import GameConfig
from .errors import (
    EmbeddingDimMismatch,
    EmptyAfterCanonicalization,
    InvalidSimplex,
    NoValidCandidates,
    ZeroNormEmbedding,
)

MIN_EMBEDDING_NORM = 1e-12

# Order matters: longer phrases first so "the answer is" wins over "the".
DEFAULT_FILLER_PREFIXES: tuple[str, ...] = (
    "the answer is",
    "the image shows",
    "this is",
    "it is",
    "answer:",
    "a:",
)
DEFAULT_ARTICLES: tuple[str, ...] = ("a", "an", "the")

_SENTENCE_END = re.compile(r"[.!?](?=\s|$)")
_WS = re.compile(r"\s+")
_EDGE_CHARS = string.punctuation + string.whitespace


def _prefix_pattern(prefixes: Sequence[str], articles: Sequence[str]) -> re.Pattern:
    alts = []
    for p in prefixes:
        p = p.strip().lower()
        # word-like fillers need a boundary, "answer:"-style ones do not
        tail = r"\b" if p[-1].isalnum() else ""
        alts.append(re.escape(p) + tail)
    alts.extend(re.escape(a) + r"(?=\s)" for a in articles)
    return re.compile(r"^(?:" + "|".join(alts) + r")\s*")


_DEFAULT_PREFIX_RE = _prefix_pattern(DEFAULT_FILLER_PREFIXES, DEFAULT_ARTICLES)


def _one_pass(text: str, prefix_re: re.Pattern) -> str:
    m = _SENTENCE_END.search(text)
    if m:
        text = text[: m.start()]
    text = _WS.sub(" ", text).strip().lower()
    text = prefix_re.sub("", text, count=1)
    text = text.strip(_EDGE_CHARS)
    return _WS.sub(" ", text)


def canonicalize(raw: str, prefixes: Sequence[str] | None = None) -> str:
    """Reduce a sampled answer to its lowercase core.

    Truncates at the first sentence end, strips one filler prefix or leading
    article, trims surrounding punctuation and collapses whitespace. The pass
    is repeated until nothing changes, which makes the result idempotent.

    >>> canonicalize("The answer is the liver.")
    'liver'
    """
    if not isinstance(raw, str) or not raw.strip():
        raise EmptyAfterCanonicalization(f"empty answer {raw!r}")
    prefix_re = _DEFAULT_PREFIX_RE if prefixes is None else _prefix_pattern(prefixes, DEFAULT_ARTICLES)
    text = raw
    while True:
        nxt = _one_pass(text, prefix_re)
        if nxt == text or not nxt:
            text = nxt
            break
        text = nxt
    if not text:
        raise EmptyAfterCanonicalization(f"nothing left of {raw!r} after canonicalization")
    return text


def _as_embedding(vec) -> np.ndarray:
    e = np.array(vec, dtype=np.float64).reshape(-1)
    if e.size == 0:
        raise EmbeddingDimMismatch("empty embedding")
    if not np.all(np.isfinite(e)):
        raise ZeroNormEmbedding("embedding has non-finite entries")
    if np.linalg.norm(e) < MIN_EMBEDDING_NORM:
        raise ZeroNormEmbedding("embedding norm below 1e-12")
    e.setflags(write=False)
    return e


@dataclass(frozen=True, eq=False)
class Candidate:
    raw_text: str
    canonical_text: str
    embedding: np.ndarray

    def __post_init__(self):
        if not self.canonical_text:
            raise EmptyAfterCanonicalization("candidate with empty canonical text")
        object.__setattr__(self, "embedding", _as_embedding(self.embedding))


@dataclass(frozen=True)
class CandidateSet:
    candidates: tuple[Candidate, ...]

    def __post_init__(self):
        cands = tuple(self.candidates)
        if not cands:
            raise NoValidCandidates("candidate set is empty")
        texts = [c.canonical_text for c in cands]
        if len(set(texts)) != len(texts):
            raise ValueError("canonical texts must be pairwise distinct")
        dims = {c.embedding.shape[0] for c in cands}
        if len(dims) != 1:
            raise EmbeddingDimMismatch(f"mixed embedding dimensions {sorted(dims)}")
        object.__setattr__(self, "candidates", cands)

    def __len__(self) -> int:
        return len(self.candidates)

    def __getitem__(self, i: int) -> Candidate:
        return self.candidates[i]

    def __iter__(self):
        return iter(self.candidates)

    @property
    def texts(self) -> tuple[str, ...]:
        return tuple(c.canonical_text for c in self.candidates)

    def embeddings(self) -> np.ndarray:
        return np.stack([c.embedding for c in self.candidates])

    def index_of(self, canonical_text: str) -> int:
        return self.texts.index(canonical_text)


def build_candidate_set(
    samples: Iterable[tuple[str, Sequence[float]]],
    config: GameConfig | None = None,
    prefixes: Sequence[str] | None = None,
) -> CandidateSet:
    """Accept samples in order until ``n_candidates`` distinct canonical answers.

    At most ``max_sampling_calls`` samples are consumed. Samples that
    canonicalize to nothing are skipped; exact duplicates of an accepted
    canonical text are dropped.
    """
    cfg = config or GameConfig()
    accepted: list[Candidate] = []
    seen: set[str] = set()
    dim = None
    consumed = 0
    for sample in samples:
        if len(accepted) >= cfg.n_candidates or consumed >= cfg.max_sampling_calls:
            break
        consumed += 1
        raw, emb = sample[0], sample[1]
        emb = np.asarray(emb, dtype=np.float64).reshape(-1)
        if dim is None:
            dim = emb.shape[0]
        elif emb.shape[0] != dim:
            raise EmbeddingDimMismatch(f"embedding dimension {emb.shape[0]} differs from {dim}")
        try:
            text = canonicalize(raw, prefixes)
        except EmptyAfterCanonicalization:
            continue
        if text in seen:
            continue
        seen.add(text)
        accepted.append(Candidate(raw, text, emb))
    if consumed == 0:
        raise NoValidCandidates("no samples supplied")
    if not accepted:
        raise NoValidCandidates("every sample canonicalized to an empty answer")
    return CandidateSet(tuple(accepted))


@dataclass(frozen=True, eq=False)
class GroundMetric:
    """Symmetric candidate distance matrix with zero diagonal, entries in [0, 2]."""

    D: np.ndarray

    def __post_init__(self):
        D = np.array(self.D, dtype=np.float64)
        if D.ndim != 2 or D.shape[0] != D.shape[1] or D.shape[0] < 1:
            raise InvalidSimplex(f"ground metric must be square, got shape {D.shape}")
        if not np.all(np.isfinite(D)):
            raise ValueError("ground metric has non-finite entries")
        if np.any(np.diag(D) != 0):
            raise ValueError("ground metric diagonal must be exactly zero")
        if np.max(np.abs(D - D.T)) > 1e-12:
            raise ValueError("ground metric must be symmetric")
        if D.min() < 0 or D.max() > 2:
            raise ValueError("ground metric entries must lie in [0, 2]")
        D.setflags(write=False)
        object.__setattr__(self, "D", D)

    @property
    def n(self) -> int:
        return self.D.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.D if dtype is None else self.D.astype(dtype)


def cosine_distance_matrix(embeddings: np.ndarray) -> np.ndarray:
    E = np.asarray(embeddings, dtype=np.float64)
    norms = np.linalg.norm(E, axis=1)
    if np.any(norms < MIN_EMBEDDING_NORM):
        i = int(np.argmin(norms))
        raise ZeroNormEmbedding(f"embedding {i} has norm {norms[i]!r}")
    U = E / norms[:, None]
    C = U @ U.T
    C = 0.5 * (C + C.T)
    D = np.clip(1.0 - C, 0.0, 2.0)
    np.fill_diagonal(D, 0.0)
    return D


def ground_metric(cset: CandidateSet) -> GroundMetric:
    """D_ij = 1 - cos(e_i, e_j), clamped to [0, 2] with an exact zero diagonal."""
    return GroundMetric(cosine_distance_matrix(cset.embeddings()))
