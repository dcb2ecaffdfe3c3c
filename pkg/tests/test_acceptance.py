"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line in the summary.

Tolerances and sizes are fixed by the acceptance contract and not tuned here.
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest

from wbdg import GameConfig
from wbdg.candidates import Candidate, CandidateSet, GroundMetric, build_candidate_set, canonicalize
from wbdg.cli import main as cli_main
from wbdg.core import GeneratorStrategy, Simplex, VerifierStrategy
from wbdg.errors import AllZero, BDGError, EmptyAfterCanonicalization, NoValidCandidates, ZeroColumn
from wbdg.game import (
    GameState,
    InitScores,
    check_stop_wasserstein,
    normalize_opponent_generator,
    normalize_opponent_verifier,
    run_game,
    update_generator,
    update_verifier,
    verifier_correct_distribution,
)
from wbdg.harness.evaluate import DecisionRule, compare_convergence, decide, default_workers
from wbdg.harness.metrics import exact_match, semantic_similarity, token_f1
from wbdg.scorer.synthetic import SyntheticSpec, SyntheticSuite
from wbdg.scorer.trace import instance_from_dict, load_trace, save_trace
from wbdg.transport import wasserstein1_cost, wasserstein1_oracle

FIXTURES = Path(__file__).parent / "fixtures"

C1_INSTANCES, C1_TOL, C1_SECONDS = 1000, 1e-9, 60.0
C2_TOL, C2_FIXED_ITERS = 1e-12, 1000
C3_GAMES, C3_STEPS, C3_TOL = 100, 100, 1e-9
C4_TOL = 1e-9
C5_INSTANCES, C5_SEEDS = 200, (1, 2, 3, 4, 5)
C5_CONVERGED, C5_BAND, C5_AGREEMENT, C5_ALPHA, C5_SECONDS = 0.95, (10.0, 30.0), 0.90, 0.01, 300.0


# --------------------------------------------------------------------------
# 1. W1 oracle equivalence
# --------------------------------------------------------------------------


def _grid_simplex(rng, n, grid):
    cuts = np.sort(rng.integers(0, grid + 1, size=n - 1))
    return np.diff(np.concatenate([[0], cuts, [grid]])) / grid


def _pseudo_metric(rng, n):
    A = np.triu(rng.uniform(0, 2, size=(n, n)), 1)
    return A + A.T


def test_c1_w1_oracle_equivalence(criterion):
    with criterion(1, "W1 oracle equivalence") as c:
        rng = np.random.default_rng(1)
        start = time.perf_counter()
        worst = 0.0
        for _ in range(C1_INSTANCES):
            n, grid = int(rng.integers(2, 6)), int(rng.integers(1, 9))
            p, q, D = _grid_simplex(rng, n, grid), _grid_simplex(rng, n, grid), _pseudo_metric(rng, n)
            worst = max(worst, abs(wasserstein1_cost(p, q, D) - wasserstein1_oracle(p, q, D, grid)))
        elapsed = time.perf_counter() - start
        ok_err = c.check(worst <= C1_TOL, f"max |simplex - oracle| = {worst:.2e} over {C1_INSTANCES} (tol {C1_TOL:g})")
        ok_time = c.check(elapsed < C1_SECONDS, f"{elapsed:.1f}s (limit {C1_SECONDS:g}s)")
    assert ok_err and ok_time


# --------------------------------------------------------------------------
# 2. update-step correctness
# --------------------------------------------------------------------------


def _scalar_step(a, opp, t, lam, eta):
    den = 1.0 / (eta * t) + lam
    z = [(0.5 * o + lam * math.log(x)) / den for x, o in zip(a, opp)]
    m = max(z)
    e = [math.exp(v - m) for v in z]
    return [v / sum(e) for v in e]


def test_c2_update_steps(criterion):
    cfg = GameConfig()
    with criterion(2, "update-step correctness") as c:
        g = GeneratorStrategy(Simplex([0.7, 0.3]), Simplex([0.5, 0.5]))
        gen_out = update_generator(g, np.array([[0.6, 0.5], [0.4, 0.5]]), 1, cfg).correct.weights
        gen_err = np.max(np.abs(gen_out - _scalar_step([0.7, 0.3], [0.6, 0.4], 1, 0.4, 0.4)))
        v = VerifierStrategy([[0.7, 0.3], [0.4, 0.6]])
        aG = np.array([[0.6, 0.4], [0.4, 0.6]])
        ver_out = update_verifier(v, aG, 1, cfg).probs
        ver_ref = [_scalar_step([0.7, 0.3], [0.6, 0.4], 1, 0.4, 0.4), _scalar_step([0.4, 0.6], [0.4, 0.6], 1, 0.4, 0.4)]
        ver_err = np.max(np.abs(ver_out - np.array(ver_ref)))
        ok1 = c.check(gen_err <= C2_TOL, f"generator step err {gen_err:.1e}")
        ok2 = c.check(ver_err <= C2_TOL, f"verifier step err {ver_err:.1e}")

        n = 4
        u = np.ones(n) / n
        g = GeneratorStrategy(Simplex(u), Simplex(u))
        v = VerifierStrategy(np.full((n, 2), 0.5))
        exact = True
        for t in range(1, C2_FIXED_ITERS + 1):
            g, v = (
                update_generator(g, normalize_opponent_verifier(v), t, cfg),
                update_verifier(v, normalize_opponent_generator(g), t, cfg),
            )
            exact &= np.array_equal(g.as_matrix(), np.full((n, 2), 1 / n)) and np.array_equal(v.probs, np.full((n, 2), 0.5))
        ok3 = c.check(exact, f"uniform fixed point bit-exact for {C2_FIXED_ITERS} iterations")
    assert ok1 and ok2 and ok3


# --------------------------------------------------------------------------
# 3. simplex preservation
# --------------------------------------------------------------------------


def test_c3_simplex_preservation(criterion):
    cfg = GameConfig()
    with criterion(3, "simplex preservation") as c:
        rng = np.random.default_rng(3)
        worst, steps, bad_values = 0.0, 0, 0
        for _ in range(C3_GAMES):
            n = int(rng.integers(2, 9))
            conc = float(rng.choice([0.05, 0.5, 5.0]))
            g = GeneratorStrategy(Simplex(rng.dirichlet(np.ones(n) * conc)), Simplex(rng.dirichlet(np.ones(n) * conc)))
            pc = rng.beta(conc, conc, n)
            v = VerifierStrategy(np.column_stack([pc, 1 - pc]))
            for t in range(1, C3_STEPS + 1):
                g, v = (
                    update_generator(g, normalize_opponent_verifier(v), t, cfg),
                    update_verifier(v, normalize_opponent_generator(g), t, cfg),
                )
                steps += 1
                for arr in (g.correct.weights, g.incorrect.weights):
                    worst = max(worst, abs(arr.sum() - 1.0))
                    bad_values += int(np.any(arr < 0) or not np.all(np.isfinite(arr)))
                worst = max(worst, float(np.max(np.abs(v.probs.sum(axis=1) - 1.0))))
                bad_values += int(np.any(v.probs < 0) or not np.all(np.isfinite(v.probs)))
        # full games record traces; none of their numbers may be NaN or infinite
        nonfinite = 0
        for k in range(C3_GAMES):
            n = int(rng.integers(2, 9))
            scores = InitScores(np.log(rng.dirichlet(np.ones(n), size=2).T), np.log(rng.dirichlet([1, 1], size=n)))
            cset = CandidateSet(tuple(Candidate(f"c{i}", f"c{i}", rng.normal(size=4)) for i in range(n)))
            D = _pseudo_metric(rng, n)
            res = run_game(scores, cset, GroundMetric(D), cfg.with_overrides(max_iterations=C3_STEPS))
            for rec in res.trace.records:
                vals = list(rec.generator_correct) + list(rec.verifier_correct) + [rec.sigma_G, rec.sigma_V, rec.w1, rec.w1_weighted]
                nonfinite += sum(1 for x in vals if not math.isfinite(x))
        ok1 = c.check(steps == C3_GAMES * C3_STEPS and worst <= C3_TOL and bad_values == 0,
                      f"{steps} steps, max |sum - 1| = {worst:.1e}, invalid entries {bad_values}")
        ok2 = c.check(nonfinite == 0, f"non-finite trace values: {nonfinite}")
    assert ok1 and ok2


# --------------------------------------------------------------------------
# 4. stopping-criterion algebra
# --------------------------------------------------------------------------


def test_c4_threshold_crossing(criterion):
    cfg = GameConfig()
    with criterion(4, "stopping-criterion algebra") as c:
        mismatches, checks, worst = 0, 0, 0.0
        for m in (0.02, 0.05, 0.1):
            for top in (0.6, 0.75, 0.9):
                p_G = np.array([0.4, 0.35, 0.25])
                p_V = p_G + np.array([0.0, -m, m])
                pc = p_V / p_V.max() * top
                g = GeneratorStrategy(Simplex(p_G), Simplex([0.05, 0.6, 0.35]))
                v = VerifierStrategy(np.column_stack([pc, 1 - pc]))
                state = GameState.from_strategies(1, g, v)
                d_star = cfg.delta_W * (state.sigma_V_current + cfg.epsilon) / m
                for d in (0.9 * d_star, d_star * (1 - 1e-6), d_star * (1 + 1e-6)):
                    if d > 2.0:
                        continue
                    D = GroundMetric([[0, 2.0, 2.0], [2.0, 0, d], [2.0, d, 0]])
                    stop, w1, weighted = check_stop_wasserstein(state, D, cfg)
                    expected = m * d / (state.sigma_V_current + cfg.epsilon) < cfg.delta_W
                    worst = max(worst, abs(w1 - m * d))
                    mismatches += int(stop != expected)
                    checks += 1
        ok = c.check(mismatches == 0 and worst <= C4_TOL and checks >= 9,
                     f"{checks} bracketing checks, {mismatches} mismatches, max |W1 - m*D| = {worst:.1e}")
    assert ok


# --------------------------------------------------------------------------
# 5. convergence-reduction reproduction
# --------------------------------------------------------------------------


def acceptance_suite():
    spec = SyntheticSpec(
        n_clusters=2,
        cluster_sizes=(3, 3),
        intra_cluster_distance=0.05,
        inter_cluster_distance=0.9,
        generator_noise=0.3,
    )
    return SyntheticSuite(spec, n_instances=C5_INSTANCES, seed=0)


@pytest.mark.slow
def test_c5_convergence_reduction(criterion):
    cfg = GameConfig(max_iterations=500)
    with criterion(5, "convergence-reduction reproduction") as c:
        start = time.perf_counter()
        rep = compare_convergence(acceptance_suite(), cfg, C5_SEEDS, workers=default_workers(), min_converged=0.0)
        elapsed = time.perf_counter() - start
        s = rep.summary()
        wx = rep.wilcoxon()
        lo, hi = C5_BAND
        oks = [
            c.check(s["both_converged_fraction"] >= C5_CONVERGED, f"(a) both converge on {s['both_converged_fraction']:.1%}"),
            c.check(
                s["wasserstein"]["mean"] <= s["classic"]["mean"] and lo <= s["reduction_pct"] <= hi,
                f"(b) mean {s['classic']['mean']:.1f} -> {s['wasserstein']['mean']:.1f}, reduction {s['reduction_pct']:.1f}%",
            ),
            c.check(s["winner_agreement"] >= C5_AGREEMENT, f"(c) winner agreement {s['winner_agreement']:.1%}"),
            c.check(wx.p_value < C5_ALPHA, f"(d) Wilcoxon p = {wx.p_value:.1e}"),
        ]
        c.note(f"{s['n_pairs']} pairs in {elapsed:.0f}s")
        oks.append(c.check(elapsed < C5_SECONDS, f"runtime under {C5_SECONDS:g}s"))
    assert all(oks)


# --------------------------------------------------------------------------
# 6. determinism
# --------------------------------------------------------------------------


def test_c6_eval_determinism(criterion, tmp_path):
    import json

    suite = SyntheticSuite(SyntheticSpec(duplicate_samples=2), n_instances=30, seed=6)
    spec_path = tmp_path / "suite.json"
    spec_path.write_text(json.dumps(suite.to_dict()), encoding="utf-8")
    with criterion(6, "determinism") as c:
        outs = []
        for k, workers in enumerate(("1", "2")):
            out = tmp_path / f"report{k}.json"
            code = cli_main(["eval", "--synth", str(spec_path), "--rules", "all", "--seeds", "1,2,3,4,5",
                             "--workers", workers, "--out", str(out)])
            assert code == 0
            outs.append(out.read_bytes())
        ok = c.check(outs[0] == outs[1], f"two eval runs give byte-identical JSON ({len(outs[0])} bytes)")
    assert ok


# --------------------------------------------------------------------------
# 7. trace round trip
# --------------------------------------------------------------------------


def test_c7_trace_round_trip(criterion, tmp_path):
    with criterion(7, "trace round-trip") as c:
        first = load_trace(FIXTURES / "traces_50.json")
        save_trace(first, tmp_path / "copy.json")
        second = load_trace(tmp_path / "copy.json")
        ok = c.check(len(first) == 50 and first == second, f"{len(first)} instances identical after load-save-load")
    assert ok


# --------------------------------------------------------------------------
# 8. metric definitions
# --------------------------------------------------------------------------


def test_c8_metric_definitions(criterion):
    with criterion(8, "metric definitions") as c:
        oks = [
            c.check(token_f1("right upper lobe", "upper lobe") == 0.8, "token_f1 = 0.8 exactly"),
            c.check(
                exact_match("Liver.", "liver") == 1 and exact_match("The answer is the liver.", "LIVER") == 1
                and exact_match("liver", "hepatic region") == 0,
                "exact_match canonicalizes",
            ),
            c.check(
                semantic_similarity([1, 2, 3], [1, 2, 3]) == 1.0
                and semantic_similarity([1, 0], [0, 4]) == 0.0
                and semantic_similarity([1, -2], [-1, 2]) == -1.0,
                "cosine cases 1, 0, -1 exact",
            ),
        ]
    assert all(oks)


# --------------------------------------------------------------------------
# 9. degenerate inputs
# --------------------------------------------------------------------------


def test_c9_degenerate_inputs(criterion):
    cfg = GameConfig()
    with criterion(9, "degenerate inputs") as c:
        single = instance_from_dict({
            "schema": "bdg-trace/1", "instance_id": "one", "question": "q",
            "samples": [{"raw_text": "Liver.", "temperature": 0.5, "embedding": [1, 0]},
                        {"raw_text": "the liver", "temperature": 1.0, "embedding": [1, 0]}],
            "generator_logprob": {"liver": {"correct": -0.1, "incorrect": -2.0}},
            "verifier_logprob": {"liver": {"correct": -0.3, "incorrect": -1.2}},
            "gold_answer": "liver",
        })
        its = [decide(rule, single, cfg).iterations for rule in (DecisionRule.BDG_CLASSIC, DecisionRule.BDG_WASSERSTEIN)]
        ok1 = c.check(its == [0, 0], f"single candidate: iterations {its}")

        raised = []
        zero = VerifierStrategy([[0.0, 1.0], [0.0, 1.0]])
        for fn, exc in (
            (lambda: normalize_opponent_verifier(zero), ZeroColumn),
            (lambda: verifier_correct_distribution(zero), AllZero),
            (lambda: canonicalize("The answer is."), EmptyAfterCanonicalization),
            (lambda: build_candidate_set([("...", [1.0]), ("  ", [1.0])], cfg), NoValidCandidates),
        ):
            try:
                fn()
                raised.append(None)
            except BDGError as err:
                raised.append(type(err) if isinstance(err, exc) else type(err))
            except Exception as err:  # anything outside the error hierarchy counts as a panic
                raised.append(("panic", type(err).__name__))
        want = [ZeroColumn, AllZero, EmptyAfterCanonicalization, NoValidCandidates]
        ok2 = c.check(raised == want, "zero columns and empty canonicalizations raise " + ", ".join(e.__name__ for e in want))
    assert ok1 and ok2
