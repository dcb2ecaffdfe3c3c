"""Wilcoxon signed-rank test for paired iteration counts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

EXACT_MAX_PAIRS = 25


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # W+ (sum of ranks of positive differences)
    p_value: float
    n_used: int
    method: str


def _exact_two_sided(w_plus: float, ranks: np.ndarray) -> float:
    # doubled ranks are integers even with ties; enumerate the sign-flip distribution
    r2 = np.rint(2 * ranks).astype(np.int64)
    total = int(r2.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in r2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    probs = counts / counts.sum()
    w2 = int(round(2 * w_plus))
    lower = probs[: w2 + 1].sum()
    upper = probs[w2:].sum()
    return float(min(1.0, 2 * min(lower, upper)))


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> WilcoxonResult:
    """Two-sided test of zero median for ``x - y``.

    Zero differences are dropped. Exact null distribution for at most 25
    remaining pairs, otherwise the tie-corrected normal approximation
    (no continuity correction).
    """
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    d = d[d != 0]
    n = d.shape[0]
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "none")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_MAX_PAIRS:
        return WilcoxonResult(w_plus, _exact_two_sided(w_plus, ranks), n, "exact")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_counts**3 - tie_counts)) / 48.0
    if var <= 0:
        return WilcoxonResult(w_plus, 1.0, n, "approx")
    z = (w_plus - mean) / math.sqrt(var)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return WilcoxonResult(w_plus, float(min(1.0, p)), n, "approx")
