"""Command-line entry point: ``wbdg {run,eval,convergence,w1}``.

Exit codes: 0 success, 2 invalid input (parse, schema, config, unknown
rule, duplicate seed), 3 runtime failure (including unwritable output),
4 when too few games converge for a convergence comparison.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .candidates import ground_metric
from .core import GameConfig
from .errors import (
    BDGError,
    ConfigError,
    DimensionMismatch,
    EmbeddingDimMismatch,
    InfeasibleMarginals,
    InsufficientConvergence,
    InvalidSimplex,
    NonFinite,
    NotGridRepresentable,
    TooLarge,
    TraceError,
)
from .game import run_game
from .harness.evaluate import ALL_RULES, compare_convergence, default_workers, parse_rule, run_eval
from .scorer.synthetic import SyntheticSuite, load_suite
from .scorer.trace import load_trace
from .transport import wasserstein1, wasserstein1_oracle

log = logging.getLogger("wbdg")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3
EXIT_NOT_CONVERGED = 4
CONFIG_ENV = "BDG_CONFIG"
RUN_SCHEMA = "bdg-run/1"

_INPUT_ERRORS = (TraceError, ConfigError, EmbeddingDimMismatch, InvalidSimplex, InfeasibleMarginals, DimensionMismatch,
                 TooLarge, NotGridRepresentable)


class UsageError(Exception):
    """Bad command-line value that argparse cannot catch on its own."""


@dataclass
class CliConfig:
    """Validated view of one invocation; built before any game is played."""

    subcommand: str
    inputs: dict[str, Path | None]
    out: Path | None
    game: GameConfig
    seeds: tuple[int, ...] = ()
    rules: tuple[str, ...] = ()
    verbose: bool = False
    suite: SyntheticSuite | None = None


# ---------------------------------------------------------------------------
# argument parsing helpers
# ---------------------------------------------------------------------------


def parse_seeds(text: str | None) -> tuple[int, ...]:
    """``"1,2,5-7"`` -> (1, 2, 5, 6, 7); empty means the harness default."""
    if text is None or not text.strip():
        return ()
    seeds: list[int] = []
    for tok in text.split(","):
        m = re.fullmatch(r"\s*(\d+)\s*(?:-\s*(\d+)\s*)?", tok)
        if m is None:
            raise UsageError(f"invalid seed {tok.strip()!r}")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) else lo
        seeds.extend(range(lo, hi + 1))
    if len(set(seeds)) != len(seeds):
        raise UsageError(f"duplicate seeds in {text!r}")
    return tuple(seeds)


def parse_rules(text: str | None) -> tuple[str, ...]:
    if text is None or text.strip().lower() in ("", "all"):
        return tuple(r.value for r in ALL_RULES)
    out = []
    for tok in text.split(","):
        try:
            out.append(parse_rule(tok).value)
        except ConfigError:
            raise UsageError(f"unknown decision rule {tok.strip()!r}") from None
    if len(set(out)) != len(out):
        raise UsageError(f"decision rule listed twice in {text!r}")
    return tuple(out)


def parse_vector(text: str, name: str) -> np.ndarray:
    try:
        vals = json.loads(text) if text.lstrip().startswith("[") else [float(x) for x in text.split(",")]
        arr = np.asarray(vals, dtype=np.float64)
    except (ValueError, TypeError):
        raise UsageError(f"--{name}: expected comma-separated numbers, got {text!r}") from None
    if arr.ndim != 1 or arr.size == 0:
        raise UsageError(f"--{name}: expected a non-empty vector")
    return arr


def _parse_override(item: str) -> tuple[str, Any]:
    key, sep, raw = item.partition("=")
    if not sep or not key.strip():
        raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def _read_json(path: Path, what: str) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{what} {path}: invalid JSON ({exc})") from None


def resolve_config(args: argparse.Namespace, suite: SyntheticSuite | None = None) -> GameConfig:
    """defaults < suite config < config file (``--config`` or $BDG_CONFIG) < flags."""
    cfg = GameConfig()
    if suite is not None:
        cfg = suite.game_config(cfg)
    path = args.config or os.environ.get(CONFIG_ENV) or None
    if path:
        data = _read_json(Path(path), "config file")
        if not isinstance(data, dict):
            raise UsageError(f"config file {path}: expected a JSON object")
        cfg = cfg.with_overrides(data)
    flags = dict(_parse_override(s) for s in (args.set or ()))
    if getattr(args, "stopping", None):
        flags["stopping_mode"] = args.stopping
    return cfg.with_overrides(flags)


def _check_writable(out: Path | None) -> None:
    if out is None:
        return
    parent = out.parent if str(out.parent) else Path(".")
    if not parent.is_dir() or not os.access(parent, os.W_OK) or out.is_dir():
        raise OSError(f"cannot write output to {out}")


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text, encoding="utf-8")
        log.info("wrote %s", out)


def cli_config(args: argparse.Namespace) -> CliConfig:
    suite = load_suite(args.synth) if getattr(args, "synth", None) else None
    trace = getattr(args, "trace", None)
    out = Path(args.out) if getattr(args, "out", None) else None
    cc = CliConfig(
        subcommand=args.subcommand,
        inputs={"trace": Path(trace) if trace else None, "synth": Path(args.synth) if suite else None},
        out=out,
        game=resolve_config(args, suite),
        seeds=parse_seeds(getattr(args, "seeds", None)),
        rules=parse_rules(getattr(args, "rules", None)),
        verbose=args.verbose,
        suite=suite,
    )
    _check_writable(out)
    return cc


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(args: argparse.Namespace) -> int:
    cc = cli_config(args)
    cfg = cc.game
    instances = cc.suite.instances(args.seed) if cc.suite else load_trace(cc.inputs["trace"], cfg)
    results = []
    for trace in instances:
        cset = trace.candidate_set(cfg)
        res = run_game(trace.init_scores(cset), cset, ground_metric(cset), cfg)
        last = res.trace.records[-1] if len(res.trace) else None
        entry = {
            "instance_id": trace.instance_id,
            "candidates": list(cset.texts),
            "winner": res.winner_text,
            "winner_index": res.winner_index,
            "iterations": res.iterations_used,
            "termination": res.termination.value,
            "final": last.to_dict() if last is not None else None,
        }
        if args.full_trace:
            entry["trace"] = res.trace.to_list()
        results.append(entry)
        log.debug("%s: %s after %d iterations", trace.instance_id, res.winner_text, res.iterations_used)
    doc = {"schema": RUN_SCHEMA, "config": cfg.to_dict(), "instances": results}
    _emit(json.dumps(doc, indent=1, sort_keys=True) + "\n", cc.out)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    cc = cli_config(args)
    csv_path = cc.out.with_suffix(".csv")
    _check_writable(csv_path)
    source = cc.suite or load_trace(cc.inputs["trace"], cc.game)
    report = run_eval(source, cc.rules, cc.game, cc.seeds or None, args.workers)
    cc.out.write_text(report.to_json(), encoding="utf-8")
    csv_path.write_text(report.to_csv(), encoding="utf-8")
    print(report.summary_table())
    log.info("wrote %s and %s", cc.out, csv_path)
    return EXIT_OK


def cmd_convergence(args: argparse.Namespace) -> int:
    cc = cli_config(args)
    source = cc.suite or load_trace(cc.inputs["trace"], cc.game)
    report = compare_convergence(source, cc.game, cc.seeds or None, args.workers, args.min_converged)
    s = report.summary()
    wx = s["wilcoxon"]
    for key in ("classic", "wasserstein"):
        print(f"{key:<11} mean {s[key]['mean']:.2f} iterations (converged {s[key]['converged_fraction']:.1%})")
    print(f"reduction   {s['reduction_pct']:.2f}%")
    print(f"agreement   {s['winner_agreement']:.1%}")
    print(f"wilcoxon    W={wx['statistic']:.1f} p={wx['p_value']:.3g} ({wx['method']}, n={wx['n_used']})")
    if cc.out is not None:
        _emit(report.to_json(), cc.out)
    return EXIT_OK


def cmd_w1(args: argparse.Namespace) -> int:
    p = parse_vector(args.p, "p")
    q = parse_vector(args.q, "q")
    D = np.asarray(_read_json(Path(args.metric), "metric file"), dtype=np.float64) if args.metric else None
    if D is None:
        if p.size != q.size:
            raise DimensionMismatch(f"p has {p.size} entries, q has {q.size}")
        D = 1.0 - np.eye(p.size)
    cost, plan = wasserstein1(p, q, D)
    print(f"cost {cost:.12g}")
    print("row_sums " + " ".join(f"{x:.12g}" for x in plan.row_sums()))
    print("col_sums " + " ".join(f"{x:.12g}" for x in plan.col_sums()))
    if args.verbose:
        for row in plan.gamma:
            print("plan " + " ".join(f"{x:.12g}" for x in row))
    if args.oracle_grid:
        print(f"oracle {wasserstein1_oracle(p, q, D, args.oracle_grid):.12g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------


def _source_flags(p: argparse.ArgumentParser, synth_help: str) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", metavar="PATH", help="recorded instance traces (bdg-trace/1 JSON array)")
    src.add_argument("--synth", metavar="PATH", help=synth_help)


def _config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help=f"JSON object of GameConfig overrides (fallback: ${CONFIG_ENV})")
    p.add_argument("--stopping", choices=("classic", "wasserstein"), help="stopping criterion")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one GameConfig field; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wbdg", description=__doc__.splitlines()[0], allow_abbrev=False)
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    common = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    common.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS, help="debug logging on stderr")

    p = sub.add_parser("run", parents=[common], help="play the game on every instance", allow_abbrev=False)
    _source_flags(p, "synthetic suite spec (bdg-synth/1)")
    _config_flags(p)
    p.add_argument("--seed", type=int, default=1, help="draw of the synthetic suite (default 1)")
    p.add_argument("--full-trace", action="store_true", help="include every iteration record")
    p.add_argument("--out", metavar="PATH", help="report path (default stdout)")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("eval", parents=[common], help="score decision rules across seeds", allow_abbrev=False)
    _source_flags(p, "synthetic suite spec (bdg-synth/1)")
    _config_flags(p)
    p.add_argument("--rules", metavar="LIST", help="comma-separated rules or 'all' (greedy,scd,verifier,bdg-classic,bdg-w)")
    p.add_argument("--seeds", metavar="LIST", help="comma-separated seeds, ranges allowed (default 1-5)")
    p.add_argument("--workers", type=int, default=default_workers(), metavar="N", help="worker processes")
    p.add_argument("--out", metavar="PATH", required=True, help="JSON report; the CSV goes next to it")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("convergence", parents=[common], help="compare classic and Wasserstein stopping", allow_abbrev=False)
    _source_flags(p, "synthetic suite spec (bdg-synth/1)")
    _config_flags(p)
    p.add_argument("--seeds", metavar="LIST", help="comma-separated seeds, ranges allowed (default 1-5)")
    p.add_argument("--workers", type=int, default=default_workers(), metavar="N", help="worker processes")
    p.add_argument("--min-converged", type=float, default=0.9, metavar="FRAC",
                   help="required fraction of games converging in both modes (default 0.9)")
    p.add_argument("--out", metavar="PATH", help="JSON report (default: summary only)")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("w1", parents=[common], help="exact Wasserstein-1 between two distributions", allow_abbrev=False)
    p.add_argument("--p", required=True, help="source weights, e.g. 0.5,0.5")
    p.add_argument("--q", required=True, help="target weights")
    p.add_argument("--metric", metavar="PATH", help="JSON square matrix (default: 0/1 metric)")
    p.add_argument("--oracle-grid", type=int, metavar="K", help="also run the brute-force oracle on the 1/K lattice")
    p.set_defaults(func=cmd_w1)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InsufficientConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except _INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (BDGError, NonFinite, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
