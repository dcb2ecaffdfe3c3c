"""Decision rules, batch evaluation and the convergence comparison."""

from __future__ import annotations

import csv
import enum
import io
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from ..candidates import CandidateSet, GroundMetric, canonicalize, ground_metric
from ..core import GameConfig, StoppingMode, softmax_from_logits
from ..errors import ConfigError, EmptyAfterCanonicalization, InsufficientConvergence
from ..game import InitScores, Termination, run_game
from ..scorer.synthetic import SyntheticSuite
from ..scorer.trace import InstanceTrace
from .metrics import exact_match, rescale_similarity, semantic_similarity, token_f1
from .stats import wilcoxon_signed_rank

REPORT_SCHEMA = "bdg-report/1"
CONVERGENCE_SCHEMA = "bdg-convergence/1"
CSV_COLUMNS = ("instance_id", "rule", "seed", "answer", "em", "f1", "semsim", "iterations", "termination")
DEFAULT_SEEDS = (1, 2, 3, 4, 5)
CONVERGENCE_PRECONDITION = 0.9


class DecisionRule(str, enum.Enum):
    GREEDY = "greedy"
    SCD = "scd"
    VERIFIER_ONLY = "verifier"
    BDG_CLASSIC = "bdg-classic"
    BDG_WASSERSTEIN = "bdg-w"

    @property
    def is_game(self) -> bool:
        return self in (DecisionRule.BDG_CLASSIC, DecisionRule.BDG_WASSERSTEIN)


ALL_RULES = tuple(DecisionRule)

_RULE_ALIASES = {
    "g": DecisionRule.GREEDY,
    "verifier-only": DecisionRule.VERIFIER_ONLY,
    "verifieronly": DecisionRule.VERIFIER_ONLY,
    "v": DecisionRule.VERIFIER_ONLY,
    "classic": DecisionRule.BDG_CLASSIC,
    "bdgclassic": DecisionRule.BDG_CLASSIC,
    "bdg-wasserstein": DecisionRule.BDG_WASSERSTEIN,
    "bdgwasserstein": DecisionRule.BDG_WASSERSTEIN,
    "wasserstein": DecisionRule.BDG_WASSERSTEIN,
}


def parse_rule(token: str) -> DecisionRule:
    key = token.strip().lower()
    try:
        return DecisionRule(key)
    except ValueError:
        pass
    if key in _RULE_ALIASES:
        return _RULE_ALIASES[key]
    raise ConfigError(f"unknown decision rule {token!r}")


@dataclass(frozen=True)
class Decision:
    answer: str
    index: int | None
    embedding: np.ndarray | None
    iterations: int | None = None
    termination: str | None = None


@dataclass(frozen=True, eq=False)
class PreparedInstance:
    trace: InstanceTrace
    cset: CandidateSet
    metric: GroundMetric
    scores: InitScores


def prepare(trace: InstanceTrace, cfg: GameConfig) -> PreparedInstance:
    cset = trace.candidate_set(cfg)
    return PreparedInstance(trace, cset, ground_metric(cset), trace.init_scores(cset))


def _by_index(prep: PreparedInstance, i: int, **extra) -> Decision:
    c = prep.cset[i]
    return Decision(c.canonical_text, i, c.embedding, **extra)


def decide(rule: DecisionRule | str, trace: InstanceTrace | PreparedInstance, cfg: GameConfig) -> Decision:
    """Pick one answer for ``trace`` under ``rule``."""
    rule = parse_rule(rule) if isinstance(rule, str) else rule
    prep = trace if isinstance(trace, PreparedInstance) else prepare(trace, cfg)
    if rule is DecisionRule.GREEDY:
        s = prep.trace.greedy_sample()
        try:
            text = canonicalize(s.raw_text)
        except EmptyAfterCanonicalization:
            text = ""
        idx = prep.cset.texts.index(text) if text in prep.cset.texts else None
        return Decision(text, idx, np.asarray(s.embedding, dtype=np.float64))
    if rule is DecisionRule.SCD:
        g = prep.scores.generator_logprob
        return _by_index(prep, int(np.argmax(g[:, 0] - g[:, 1])))
    if rule is DecisionRule.VERIFIER_ONLY:
        p_correct = [softmax_from_logits(row).weights[0] for row in prep.scores.verifier_logprob]
        return _by_index(prep, int(np.argmax(p_correct)))
    mode = StoppingMode.CLASSIC if rule is DecisionRule.BDG_CLASSIC else StoppingMode.WASSERSTEIN
    result = run_game(prep.scores, prep.cset, prep.metric, cfg.with_overrides(stopping_mode=mode))
    return _by_index(prep, result.winner_index, iterations=result.iterations_used, termination=result.termination.value)


def _gold_embedding(prep: PreparedInstance) -> np.ndarray | None:
    if prep.trace.gold_embedding is not None:
        return np.asarray(prep.trace.gold_embedding, dtype=np.float64)
    try:
        gold = canonicalize(prep.trace.gold_answer)
    except EmptyAfterCanonicalization:
        return None
    if gold in prep.cset.texts:
        return prep.cset[prep.cset.index_of(gold)].embedding
    return None


def _eval_instance(args) -> list[dict[str, Any]]:
    trace, rules, cfg, seed = args
    prep = prepare(trace, cfg)
    gold_emb = _gold_embedding(prep)
    rows = []
    for rule in rules:
        d = decide(rule, prep, cfg)
        sem = None
        if gold_emb is not None and d.embedding is not None:
            sem = semantic_similarity(d.embedding, gold_emb)
        rows.append(
            {
                "instance_id": trace.instance_id,
                "rule": rule.value,
                "seed": seed,
                "answer": d.answer,
                "em": exact_match(d.answer, trace.gold_answer),
                "f1": token_f1(d.answer, trace.gold_answer),
                "semsim": sem,
                "iterations": d.iterations,
                "termination": d.termination,
                "judge": None,
            }
        )
    return rows


def _instances(source, seed: int) -> list[InstanceTrace]:
    if isinstance(source, SyntheticSuite):
        return source.instances(seed)
    return list(source)


def _map(fn, tasks: list, workers: int) -> list:
    """Apply ``fn`` over tasks, results in task order regardless of completion order."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _check_seeds(seeds: Sequence[int] | None) -> tuple[int, ...]:
    seeds = tuple(int(s) for s in (seeds or DEFAULT_SEEDS))
    if len(set(seeds)) != len(seeds):
        raise ConfigError(f"duplicate seeds in {list(seeds)}")
    return seeds


def _mean_std(values: Sequence[float]) -> dict[str, float]:
    a = np.asarray(values, dtype=np.float64)
    return {"mean": float(a.mean()), "std": float(a.std())}


@dataclass
class EvalReport:
    rules: tuple[str, ...]
    seeds: tuple[int, ...]
    config: dict[str, Any]
    rows: list[dict[str, Any]]
    aggregates: dict[str, dict[str, Any]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregates:
            self.aggregates = aggregate_rows(self.rows, self.rules, self.seeds)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "rules": list(self.rules),
            "seeds": list(self.seeds),
            "config": self.config,
            "aggregates": self.aggregates,
            "rows": self.rows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow(["" if r[c] is None else r[c] for c in CSV_COLUMNS])
        return buf.getvalue()

    def summary_table(self) -> str:
        lines = [f"{'rule':<12} {'EM':>15} {'F1':>15} {'Sem':>15} {'iterations':>17}"]
        for rule in self.rules:
            a = self.aggregates[rule]

            def fmt(m, scale=100.0, width=15):
                if m is None:
                    return f"{'-':>{width}}"
                return f"{m['mean'] * scale:>{width - 8}.2f} ± {m['std'] * scale:5.2f}"

            lines.append(
                f"{rule:<12} {fmt(a['exact_match'])} {fmt(a['token_f1'])} "
                f"{fmt(a['semantic_similarity'])} {fmt(a['iterations'], 1.0, 17)}"
            )
        return "\n".join(lines)


def aggregate_rows(rows: Sequence[dict], rules: Sequence[str], seeds: Sequence[int]) -> dict[str, dict[str, Any]]:
    """Per-rule mean and std across seeds of the per-seed instance means."""
    out = {}
    for rule in rules:
        per_seed: dict[str, list[float]] = {"exact_match": [], "token_f1": [], "semantic_similarity": [], "iterations": []}
        for seed in seeds:
            sel = [r for r in rows if r["rule"] == rule and r["seed"] == seed]
            if not sel:
                continue
            per_seed["exact_match"].append(float(np.mean([r["em"] for r in sel])))
            per_seed["token_f1"].append(float(np.mean([r["f1"] for r in sel])))
            sem = [rescale_similarity(r["semsim"]) for r in sel if r["semsim"] is not None]
            if sem:
                per_seed["semantic_similarity"].append(float(np.mean(sem)))
            its = [r["iterations"] for r in sel if r["iterations"] is not None]
            if its:
                per_seed["iterations"].append(float(np.mean(its)))
        out[rule] = {k: (_mean_std(v) if v else None) for k, v in per_seed.items()}
    return out


def run_eval(
    source: Iterable[InstanceTrace] | SyntheticSuite,
    rules: Sequence[DecisionRule | str] = ALL_RULES,
    cfg: GameConfig | None = None,
    seeds: Sequence[int] | None = None,
    workers: int = 1,
) -> EvalReport:
    """Run every rule on every instance for every seed.

    Synthetic suites are re-drawn per seed; recorded traces are replayed
    unchanged. Rows are ordered by seed, instance, rule.
    """
    cfg = cfg or GameConfig()
    rules = tuple(parse_rule(r) if isinstance(r, str) else r for r in rules)
    if not rules:
        raise ConfigError("no decision rules given")
    seeds = _check_seeds(seeds)
    if not isinstance(source, SyntheticSuite):
        source = list(source)
        if not source:
            raise ConfigError("no instances to evaluate")
    tasks = [(t, rules, cfg, seed) for seed in seeds for t in _instances(source, seed)]
    rows = [row for chunk in _map(_eval_instance, tasks, workers) for row in chunk]
    return EvalReport(tuple(r.value for r in rules), seeds, cfg.to_dict(), rows)


# ---------------------------------------------------------------------------
# classic vs Wasserstein convergence
# ---------------------------------------------------------------------------


def _pair(args) -> dict[str, Any]:
    trace, cfg, seed = args
    prep = prepare(trace, cfg)
    out = {"instance_id": trace.instance_id, "seed": seed}
    for key, mode in (("classic", StoppingMode.CLASSIC), ("wasserstein", StoppingMode.WASSERSTEIN)):
        res = run_game(prep.scores, prep.cset, prep.metric, cfg.with_overrides(stopping_mode=mode))
        out[f"{key}_iterations"] = res.iterations_used
        out[f"{key}_termination"] = res.termination.value
        out[f"{key}_winner"] = res.winner_text
    return out


@dataclass
class ConvergenceReport:
    pairs: list[dict[str, Any]]
    seeds: tuple[int, ...]
    config: dict[str, Any]

    def _iters(self, key: str) -> np.ndarray:
        return np.array([p[f"{key}_iterations"] for p in self.pairs], dtype=np.float64)

    def converged_fraction(self, key: str) -> float:
        done = [p[f"{key}_termination"] != Termination.MAX_ITERATIONS.value for p in self.pairs]
        return float(np.mean(done))

    @property
    def both_converged_fraction(self) -> float:
        done = [
            p["classic_termination"] != Termination.MAX_ITERATIONS.value
            and p["wasserstein_termination"] != Termination.MAX_ITERATIONS.value
            for p in self.pairs
        ]
        return float(np.mean(done))

    @property
    def reduction_pct(self) -> float:
        """Relative drop of the mean iteration count, Wasserstein vs classic, in percent."""
        c, w = self._iters("classic"), self._iters("wasserstein")
        return float(100.0 * (c.mean() - w.mean()) / c.mean()) if c.mean() > 0 else 0.0

    @property
    def winner_agreement(self) -> float:
        return float(np.mean([p["classic_winner"] == p["wasserstein_winner"] for p in self.pairs]))

    def wilcoxon(self):
        return wilcoxon_signed_rank(self._iters("classic"), self._iters("wasserstein"))

    def per_seed_means(self, key: str) -> list[float]:
        return [
            float(np.mean([p[f"{key}_iterations"] for p in self.pairs if p["seed"] == s])) for s in self.seeds
        ]

    def summary(self) -> dict[str, Any]:
        wx = self.wilcoxon()
        out = {}
        for key in ("classic", "wasserstein"):
            it = self._iters(key)
            seed_means = self.per_seed_means(key)
            out[key] = {
                "mean": float(it.mean()),
                "std": float(it.std()),
                "seed_mean_std": float(np.std(seed_means)),
                "per_seed_mean": seed_means,
                "converged_fraction": self.converged_fraction(key),
            }
        out.update(
            {
                "n_pairs": len(self.pairs),
                "both_converged_fraction": self.both_converged_fraction,
                "reduction_pct": self.reduction_pct,
                "winner_agreement": self.winner_agreement,
                "wilcoxon": {"statistic": wx.statistic, "p_value": wx.p_value, "n_used": wx.n_used, "method": wx.method},
            }
        )
        return out

    def to_json(self) -> str:
        doc = {
            "schema": CONVERGENCE_SCHEMA,
            "seeds": list(self.seeds),
            "config": self.config,
            "summary": self.summary(),
            "pairs": self.pairs,
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def compare_convergence(
    source: Iterable[InstanceTrace] | SyntheticSuite,
    cfg: GameConfig | None = None,
    seeds: Sequence[int] | None = None,
    workers: int = 1,
    min_converged: float = CONVERGENCE_PRECONDITION,
) -> ConvergenceReport:
    """Paired iteration counts of both stopping criteria on the same games.

    Raises ``InsufficientConvergence`` when fewer than ``min_converged`` of
    the pairs terminate before the iteration cap in both modes.
    """
    cfg = cfg or GameConfig()
    seeds = _check_seeds(seeds)
    if not isinstance(source, SyntheticSuite):
        source = list(source)
    tasks = [(t, cfg, seed) for seed in seeds for t in _instances(source, seed)]
    if not tasks:
        raise ConfigError("no instances to compare")
    report = ConvergenceReport(_map(_pair, tasks, workers), seeds, cfg.to_dict())
    frac = report.both_converged_fraction
    if frac < min_converged:
        raise InsufficientConvergence(
            f"only {frac:.1%} of games converged in both modes (need {min_converged:.0%})", frac
        )
    return report


def default_workers() -> int:
    return os.cpu_count() or 1
