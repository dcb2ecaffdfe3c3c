"""Answer-level metrics: exact match, token F1, embedding cosine."""

from __future__ import annotations

import math
from collections import Counter

import numpy as np

from ..candidates import MIN_EMBEDDING_NORM, canonicalize
from ..errors import EmbeddingDimMismatch, EmptyAfterCanonicalization, ZeroNormEmbedding


def _canon(text: str) -> str:
    try:
        return canonicalize(text)
    except EmptyAfterCanonicalization:
        return ""


def exact_match(pred: str, gold: str) -> int:
    """1 iff both strings canonicalize to the same answer."""
    p, g = _canon(pred), _canon(gold)
    return int(bool(p) and p == g)


def token_f1(pred: str, gold: str) -> float:
    """Harmonic mean of multiset token precision and recall on canonical text."""
    p_tokens = _canon(pred).split()
    g_tokens = _canon(gold).split()
    if not p_tokens or not g_tokens:
        return 0.0
    overlap = sum((Counter(p_tokens) & Counter(g_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(p_tokens)
    recall = overlap / len(g_tokens)
    return 2 * precision * recall / (precision + recall)


def semantic_similarity(pred_embedding, gold_embedding) -> float:
    """Raw cosine similarity clamped to [-1, 1]."""
    a = np.asarray(pred_embedding, dtype=np.float64).reshape(-1)
    b = np.asarray(gold_embedding, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise EmbeddingDimMismatch(f"embedding dimensions {a.shape[0]} and {b.shape[0]} differ")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < MIN_EMBEDDING_NORM or nb < MIN_EMBEDDING_NORM:
        raise ZeroNormEmbedding("cannot take cosine of a zero vector")
    # one square root of the product keeps parallel vectors at exactly +-1
    denom = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    if not math.isfinite(denom) or denom == 0.0:
        denom = na * nb
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def rescale_similarity(cos: float) -> float:
    """Map a cosine into [0, 1] for reporting."""
    return (cos + 1.0) / 2.0
