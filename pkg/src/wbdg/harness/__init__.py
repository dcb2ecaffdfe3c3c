"""Baseline decision rules, metrics and batch evaluation."""

from .evaluate import (
    ALL_RULES,
    ConvergenceReport,
    DecisionRule,
    EvalReport,
    compare_convergence,
    decide,
    parse_rule,
    run_eval,
)
from .metrics import exact_match, rescale_similarity, semantic_similarity, token_f1
from .stats import WilcoxonResult, wilcoxon_signed_rank

__all__ = [
    "ALL_RULES",
    "ConvergenceReport",
    "DecisionRule",
    "EvalReport",
    "compare_convergence",
    "decide",
    "parse_rule",
    "run_eval",
    "exact_match",
    "rescale_similarity",
    "semantic_similarity",
    "token_f1",
    "WilcoxonResult",
    "wilcoxon_signed_rank",
]
