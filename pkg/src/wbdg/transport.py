"""Exact discrete Wasserstein-1 distance and its brute-force oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .candidates import GroundMetric
from .core import SIMPLEX_TOL, Simplex
from .errors import (
    DimensionMismatch,
    InfeasibleMarginals,
    InvalidSimplex,
    NonFinite,
    NotGridRepresentable,
    TooLarge,
)
from .kernels import transport_simplex

ORACLE_MAX_N = 6
PLAN_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class TransportPlan:
    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=np.float64)
        if np.any(g < 0):
            raise ValueError("transport plan has negative mass")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    def row_sums(self) -> np.ndarray:
        return self.gamma.sum(axis=1)

    def col_sums(self) -> np.ndarray:
        return self.gamma.sum(axis=0)

    def is_feasible(self, p, q, tol: float = PLAN_TOL) -> bool:
        return bool(
            np.all(np.abs(self.row_sums() - np.asarray(p)) <= tol)
            and np.all(np.abs(self.col_sums() - np.asarray(q)) <= tol)
        )

    def cost(self, D) -> float:
        return float(np.sum(self.gamma * np.asarray(D)))


def _as_simplex(x, name: str) -> Simplex:
    if isinstance(x, Simplex):
        return x
    try:
        return Simplex(x)
    except (InvalidSimplex, NonFinite) as exc:
        raise InfeasibleMarginals(f"{name}: {exc}") from None


def _as_metric(D) -> np.ndarray:
    if isinstance(D, GroundMetric):
        return D.D
    return GroundMetric(D).D


def wasserstein1(p, q, D) -> tuple[float, TransportPlan]:
    """W1 between two simplices under ground metric ``D``.

    Solved exactly with the transportation simplex; the returned plan is
    one optimal plan among possibly many.
    """
    ps = _as_simplex(p, "p")
    qs = _as_simplex(q, "q")
    C = _as_metric(D)
    if not (len(ps) == len(qs) == C.shape[0]):
        raise DimensionMismatch(f"dimensions p={len(ps)}, q={len(qs)}, D={C.shape[0]}")
    if np.array_equal(ps.weights, qs.weights):
        # zero diagonal and D >= 0: staying put is optimal, and exactly 0
        return 0.0, TransportPlan(np.diag(ps.weights))
    cost, plan, _ = transport_simplex(
        np.ascontiguousarray(ps.weights), np.ascontiguousarray(qs.weights), np.ascontiguousarray(C)
    )
    return max(float(cost), 0.0), TransportPlan(plan)


def wasserstein1_cost(p, q, D) -> float:
    return wasserstein1(p, q, D)[0]


def _to_grid(x: Simplex, grid: int, name: str) -> tuple[int, ...]:
    scaled = x.weights * grid
    ints = np.rint(scaled)
    if np.any(np.abs(scaled - ints) > SIMPLEX_TOL * max(grid, 1)):
        raise NotGridRepresentable(f"{name} is not a multiple of 1/{grid}")
    out = tuple(int(v) for v in ints)
    if sum(out) != grid:
        raise NotGridRepresentable(f"{name} does not sum to {grid} grid units")
    return out


def _compositions(total: int, caps: tuple[int, ...]):
    """All non-negative integer vectors bounded by ``caps`` summing to ``total``."""
    if len(caps) == 1:
        if total <= caps[0]:
            yield (total,)
        return
    rest_cap = sum(caps[1:])
    for x in range(max(0, total - rest_cap), min(total, caps[0]) + 1):
        for tail in _compositions(total - x, caps[1:]):
            yield (x,) + tail


def wasserstein1_oracle(p, q, D, grid: int) -> float:
    """Minimum transport cost over every integer plan on a 1/grid lattice.

    Plans are enumerated row by row; rows sharing the same remaining column
    capacities are searched once (memoised), which keeps the search
    exhaustive while staying fast for n <= 6. Test use only.
    """
    ps = _as_simplex(p, "p")
    qs = _as_simplex(q, "q")
    C = _as_metric(D)
    n = len(ps)
    if len(qs) != n or C.shape[0] != n:
        raise DimensionMismatch(f"dimensions p={n}, q={len(qs)}, D={C.shape[0]}")
    if n > ORACLE_MAX_N:
        raise TooLarge(f"oracle limited to n <= {ORACLE_MAX_N}, got {n}")
    if not isinstance(grid, (int, np.integer)) or grid < 1:
        raise ValueError(f"grid must be a positive integer, got {grid!r}")
    P = _to_grid(ps, int(grid), "p")
    Q = _to_grid(qs, int(grid), "q")
    rows = [tuple(float(c) for c in C[i]) for i in range(n)]

    @lru_cache(maxsize=None)
    def best(i: int, caps: tuple[int, ...]) -> float:
        if i == n:
            return 0.0 if not any(caps) else math.inf
        out = math.inf
        for x in _compositions(P[i], caps):
            c = sum(xi * di for xi, di in zip(x, rows[i]))
            if c >= out:
                continue
            rest = best(i + 1, tuple(a - b for a, b in zip(caps, x)))
            if c + rest < out:
                out = c + rest
        return out

    return best(0, Q) / grid
