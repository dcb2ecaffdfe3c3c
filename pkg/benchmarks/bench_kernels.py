"""Time the numba kernels against the pure-numpy fallback.

Each backend runs in its own interpreter because the switch is read at import
time.  Usage::

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, sys, time
import numpy as np
from wbdg import GameConfig, backend_name
from wbdg.transport import wasserstein1_cost
from wbdg.scorer.synthetic import SyntheticSpec, SyntheticSuite
from wbdg.game import run_game
from wbdg.candidates import build_candidate_set, ground_metric

repeat = int(sys.argv[1])
rng = np.random.default_rng(0)
problems = []
for _ in range(400):
    n = int(rng.integers(2, 13))
    p, q = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(n))
    A = np.triu(rng.uniform(0, 2, (n, n)), 1)
    problems.append((p, q, A + A.T))

cfg = GameConfig()
suite = SyntheticSuite(SyntheticSpec(), n_instances=40, seed=0)
games = []
for inst in suite.instances(1):
    cset = build_candidate_set([(s.raw_text, s.embedding) for s in inst.samples], cfg)
    games.append((inst.init_scores(cset), cset, ground_metric(cset)))


def timed(fn):
    fn()  # warm-up, includes compilation on the numba path
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def w1_batch():
    for p, q, D in problems:
        wasserstein1_cost(p, q, D)


def game_batch():
    for scores, cset, D in games:
        run_game(scores, cset, D, cfg)


print(json.dumps({"backend": backend_name(), "w1_400": timed(w1_batch), "games_40": timed(game_batch)}))
"""


def run(disable: bool, repeat: int) -> dict:
    env = dict(os.environ, WBDG_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", WORKER, str(repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    fast, slow = run(False, args.repeat), run(True, args.repeat)
    print(f"{'task':<12}{fast['backend']:>12}{slow['backend']:>12}{'speedup':>10}")
    for key in ("w1_400", "games_40"):
        print(f"{key:<12}{fast[key]:>11.4f}s{slow[key]:>11.4f}s{slow[key] / fast[key]:>9.1f}x")


if __name__ == "__main__":
    main()
