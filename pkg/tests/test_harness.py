import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from wbdg.candidates import canonicalize
from wbdg.errors import ConfigError, EmbeddingDimMismatch, InsufficientConvergence, ZeroNormEmbedding
from wbdg.harness.evaluate import (
    ALL_RULES,
    CSV_COLUMNS,
    ConvergenceReport,
    DecisionRule,
    aggregate_rows,
    compare_convergence,
    decide,
    parse_rule,
    run_eval,
)
from wbdg.harness.metrics import exact_match, rescale_similarity, semantic_similarity, token_f1
from wbdg.harness.stats import wilcoxon_signed_rank
from wbdg.scorer.synthetic import SyntheticSpec, SyntheticSuite, synthesize_instance
from wbdg.scorer.trace import instance_from_dict


def scored_trace(answers, gen, ver, gold, greedy=0, embeddings=None):
    """Trace with one sample per answer; ``gen``/``ver`` are (correct, incorrect) log-prob pairs."""
    dim = len(answers)
    emb = np.eye(dim) if embeddings is None else np.asarray(embeddings, dtype=float)
    keys = [canonicalize(a) for a in answers]
    return instance_from_dict(
        {
            "schema": "bdg-trace/1",
            "instance_id": "t",
            "question": "q",
            "samples": [
                {"raw_text": a, "temperature": 0.5, "embedding": list(emb[i]), "greedy": i == greedy}
                for i, a in enumerate(answers)
            ],
            "generator_logprob": {k: {"correct": c, "incorrect": i} for k, (c, i) in zip(keys, gen)},
            "verifier_logprob": {k: {"correct": c, "incorrect": i} for k, (c, i) in zip(keys, ver)},
            "gold_answer": gold,
        }
    )


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------


@pytest.mark.parametrize(
    "pred, gold, em",
    [("liver", "liver", 1), ("liver", "hepatic region", 0), ("Liver.", "liver", 1), ("The liver", "liver!", 1)],
)
def test_exact_match(pred, gold, em):
    assert exact_match(pred, gold) == em


@pytest.mark.parametrize(
    "pred, gold, f1",
    [("right upper lobe", "upper lobe", 0.8), ("upper lobe", "upper lobe", 1.0), ("liver", "spleen", 0.0),
     ("a a b", "a b b", 2 / 3), ("...", "liver", 0.0)],
)
def test_token_f1(pred, gold, f1):
    assert token_f1(pred, gold) == pytest.approx(f1, abs=1e-15)


def test_token_f1_exact_value():
    assert token_f1("right upper lobe", "upper lobe") == 0.8


@given(st.text(alphabet="ab c", max_size=12), st.text(alphabet="ab c", max_size=12))
def test_token_f1_symmetric_and_bounded(a, b):
    f = token_f1(a, b)
    assert f == token_f1(b, a)
    assert 0.0 <= f <= 1.0


@pytest.mark.parametrize("a, b, cos", [([1, 2, 3], [1, 2, 3], 1.0), ([1, 0], [0, 5], 0.0), ([1, -2], [-1, 2], -1.0)])
def test_semantic_similarity(a, b, cos):
    assert semantic_similarity(a, b) == cos


def test_semantic_similarity_errors():
    with pytest.raises(ZeroNormEmbedding):
        semantic_similarity([0, 0], [1, 0])
    with pytest.raises(EmbeddingDimMismatch):
        semantic_similarity([1, 0], [1, 0, 0])
    assert rescale_similarity(-1.0) == 0.0 and rescale_similarity(1.0) == 1.0


# --------------------------------------------------------------------------
# Wilcoxon
# --------------------------------------------------------------------------


@pytest.mark.parametrize("n", [5, 12, 25])
def test_wilcoxon_exact_matches_scipy(n, rng):
    for _ in range(10):
        d = rng.permutation(np.arange(1, n + 1)) * rng.choice([-1, 1], n) + rng.uniform(-0.1, 0.1, n)
        ours = wilcoxon_signed_rank(d, np.zeros(n))
        ref = sps.wilcoxon(d, method="exact")
        assert ours.method == "exact"
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9, abs=1e-15)


@pytest.mark.parametrize("n", [30, 80, 400])
def test_wilcoxon_normal_matches_scipy(n, rng):
    for _ in range(5):
        d = rng.normal(0.3, 1, n)
        ours = wilcoxon_signed_rank(d, np.zeros(n))
        ref = sps.wilcoxon(d, method="approx", correction=False)
        assert ours.method == "approx"
        assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_wilcoxon_with_ties_against_scipy(rng):
    d = rng.integers(-5, 8, 200).astype(float)
    ours = wilcoxon_signed_rank(d, np.zeros_like(d))
    ref = sps.wilcoxon(d, zero_method="wilcox", method="approx", correction=False)
    assert ours.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_wilcoxon_exact_with_ties_by_enumeration():
    d = np.array([1.0, 1.0, -2.0, 3.0, 3.0, 3.0])
    ranks = sps.rankdata(np.abs(d))
    w_obs = ranks[d > 0].sum()
    dist = []
    for mask in range(2 ** len(d)):
        dist.append(sum(r for k, r in enumerate(ranks) if mask >> k & 1))
    dist = np.array(dist)
    mean = ranks.sum() / 2
    p = np.mean(np.abs(dist - mean) >= abs(w_obs - mean) - 1e-12)
    assert wilcoxon_signed_rank(d, np.zeros(6)).p_value == pytest.approx(p, abs=1e-12)


def test_wilcoxon_degenerate_cases():
    same = wilcoxon_signed_rank([3, 4, 5], [3, 4, 5])
    assert (same.p_value, same.n_used) == (1.0, 0)
    shift = wilcoxon_signed_rank(np.full(100, 10.0), np.full(100, 8.0))
    assert shift.p_value < 1e-3
    assert shift.statistic == 5050.0


# --------------------------------------------------------------------------
# decisions
# --------------------------------------------------------------------------


def test_scd_example(cfg):
    t = scored_trace(["liver", "spleen"], [(-0.1, -0.9), (-0.5, -0.4)], [(-0.7, -0.7), (-0.7, -0.7)], "liver")
    d = decide(DecisionRule.SCD, t, cfg)
    assert (d.index, d.answer, d.iterations) == (0, "liver", None)


def test_verifier_only_example(cfg):
    ver = [tuple(np.log([0.3, 0.7])), tuple(np.log([0.7, 0.3]))]
    t = scored_trace(["liver", "spleen"], [(-1.0, -1.0)] * 2, ver, "liver")
    assert decide("verifier", t, cfg).index == 1


def test_greedy_uses_designated_sample(cfg):
    t = scored_trace(["The liver.", "spleen"], [(-1.0, -1.0)] * 2, [(-1.0, -1.0)] * 2, "spleen", greedy=1)
    d = decide(DecisionRule.GREEDY, t, cfg)
    assert d.answer == "spleen" and d.iterations is None


def test_game_rules_report_iterations(near_synonym_spec, cfg):
    t = synthesize_instance(near_synonym_spec)
    c = decide(DecisionRule.BDG_CLASSIC, t, cfg)
    w = decide(DecisionRule.BDG_WASSERSTEIN, t, cfg)
    assert c.answer == w.answer
    assert w.iterations <= c.iterations
    assert (c.termination, w.termination) == ("OrderMatch", "WassersteinConsensus")


CONSENSUS_GEN = [tuple(np.log([0.6, 0.1])), tuple(np.log([0.3, 0.2])), tuple(np.log([0.1, 0.7]))]
CONSENSUS_VER = [tuple(np.log([0.9, 0.1])), tuple(np.log([0.7, 0.3])), tuple(np.log([0.2, 0.8]))]


def test_immediate_consensus_gives_same_winner(cfg):
    # liver and hepatic lobe are close, so W1 at t=1 is small as well
    emb = [[1.0, 0.0], [0.9, 0.1], [0.0, 1.0]]
    t = scored_trace(["liver", "hepatic lobe", "spleen"], CONSENSUS_GEN, CONSENSUS_VER, "liver", embeddings=emb)
    c = decide("bdg-classic", t, cfg)
    w = decide("bdg-w", t, cfg)
    assert c.iterations == 1 and w.iterations == 1
    assert c.answer == w.answer == "liver"


def test_order_match_does_not_force_wasserstein_stop(cfg):
    # same orderings at t=1, but with orthogonal embeddings W1 / sigma_V is above delta_W
    t = scored_trace(["liver", "hepatic lobe", "spleen"], CONSENSUS_GEN, CONSENSUS_VER, "liver")
    c = decide("bdg-classic", t, cfg)
    w = decide("bdg-w", t, cfg)
    assert c.iterations == 1 and w.iterations > 1
    assert c.answer == w.answer


def test_parse_rule():
    assert parse_rule("BDG-W") is DecisionRule.BDG_WASSERSTEIN
    assert parse_rule(" classic ") is DecisionRule.BDG_CLASSIC
    assert len(ALL_RULES) == 5
    with pytest.raises(ConfigError):
        parse_rule("beam")


# --------------------------------------------------------------------------
# evaluation runs
# --------------------------------------------------------------------------


def small_suite(**kw):
    return SyntheticSuite(SyntheticSpec(**kw), n_instances=12, seed=3)


def test_single_instance_greedy_exact(cfg):
    t = scored_trace(["liver", "spleen"], [(-0.1, -0.9), (-0.5, -0.4)], [(-0.2, -1.6), (-1.6, -0.2)], "liver")
    rep = run_eval([t], ["greedy"], cfg, seeds=[1, 2, 3])
    assert rep.aggregates["greedy"]["exact_match"] == {"mean": 1.0, "std": 0.0}
    assert rep.aggregates["greedy"]["iterations"] is None


def test_noise_free_suite_has_zero_std(cfg):
    rep = run_eval(small_suite(generator_noise=0.0, verifier_noise=0.0), ALL_RULES, cfg, seeds=[1, 2, 3, 4, 5])
    for rule, agg in rep.aggregates.items():
        for name, m in agg.items():
            if m is not None:
                assert m["std"] == 0.0, (rule, name)


def test_report_consistency_and_ranges(cfg):
    rep = run_eval(small_suite(), ALL_RULES, cfg, seeds=[4, 9])
    assert rep.seeds == (4, 9)
    assert len(rep.rows) == 2 * 12 * 5
    for rule in rep.rules:
        per_seed = []
        for seed in rep.seeds:
            sel = [r for r in rep.rows if r["rule"] == rule and r["seed"] == seed]
            per_seed.append(sum(r["f1"] for r in sel) / len(sel))
        assert rep.aggregates[rule]["token_f1"]["mean"] == pytest.approx(np.mean(per_seed), abs=1e-15)
        assert rep.aggregates[rule]["token_f1"]["std"] == pytest.approx(np.std(per_seed), abs=1e-15)
        for key in ("exact_match", "token_f1", "semantic_similarity"):
            assert 0.0 <= rep.aggregates[rule][key]["mean"] <= 1.0
    assert rep.aggregates["bdg-w"]["iterations"] is not None
    assert rep.aggregates["scd"]["iterations"] is None
    again = aggregate_rows(rep.rows, rep.rules, rep.seeds)
    assert again == rep.aggregates


def test_report_outputs(cfg):
    rep = run_eval(small_suite(), ["greedy", "bdg-w"], cfg, seeds=[1])
    doc = json.loads(rep.to_json())
    assert doc["schema"] == "bdg-report/1"
    assert doc["config"]["delta_W"] == 0.2
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 1 + 2 * 12
    assert "bdg-w" in rep.summary_table()
    assert all(r["judge"] is None for r in rep.rows)


def test_parallel_matches_serial(cfg):
    a = run_eval(small_suite(), ALL_RULES, cfg, seeds=[1, 2], workers=1)
    b = run_eval(small_suite(), ALL_RULES, cfg, seeds=[1, 2], workers=2)
    assert a.to_json() == b.to_json()


def test_seed_handling(cfg):
    with pytest.raises(ConfigError):
        run_eval(small_suite(), ["greedy"], cfg, seeds=[1, 1])
    assert run_eval(small_suite(), ["greedy"], cfg).seeds == (1, 2, 3, 4, 5)
    with pytest.raises(ConfigError):
        run_eval([], ["greedy"], cfg)
    with pytest.raises(ConfigError):
        run_eval(small_suite(), [], cfg)


# --------------------------------------------------------------------------
# convergence comparison
# --------------------------------------------------------------------------


def fake_pairs(classic, wass):
    return [
        {"instance_id": f"i{k}", "seed": 1, "classic_iterations": c, "wasserstein_iterations": w,
         "classic_termination": "OrderMatch", "wasserstein_termination": "WassersteinConsensus",
         "classic_winner": "x", "wasserstein_winner": "x"}
        for k, (c, w) in enumerate(zip(classic, wass))
    ]


def test_convergence_degenerate_reports():
    same = ConvergenceReport(fake_pairs([7, 9, 11], [7, 9, 11]), (1,), {})
    assert same.reduction_pct == 0.0 and same.wilcoxon().p_value == 1.0
    shifted = ConvergenceReport(fake_pairs([10] * 100, [8] * 100), (1,), {})
    assert shifted.reduction_pct == pytest.approx(20.0, abs=1e-12)
    assert shifted.wilcoxon().p_value < 1e-3
    assert shifted.winner_agreement == 1.0


def test_compare_convergence_on_suite(cfg):
    rep = compare_convergence(small_suite(), cfg, seeds=[1, 2])
    s = rep.summary()
    assert s["n_pairs"] == 24
    assert s["classic"]["converged_fraction"] == 1.0
    doc = json.loads(rep.to_json())
    assert doc["schema"] == "bdg-convergence/1"
    for p in rep.pairs:
        assert p["classic_iterations"] <= cfg.max_iterations and p["wasserstein_iterations"] <= cfg.max_iterations


def test_insufficient_convergence(cfg):
    with pytest.raises(InsufficientConvergence) as err:
        compare_convergence(small_suite(), cfg.with_overrides(max_iterations=1), seeds=[1])
    assert err.value.converged_fraction < 0.9
