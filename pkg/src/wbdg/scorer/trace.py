"""Recorded instance traces (``bdg-trace/1`` JSON files)."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from ..candidates import CandidateSet, build_candidate_set, canonicalize
from ..core import GameConfig
from ..errors import EmbeddingDimMismatch, EmptyAfterCanonicalization, ParseError, SchemaError
from ..game import InitScores

SCHEMA = "bdg-trace/1"
LABELS = ("correct", "incorrect")


@dataclass(frozen=True)
class Sample:
    raw_text: str
    temperature: float
    embedding: tuple[float, ...]
    greedy: bool = False


@dataclass(frozen=True)
class InstanceTrace:
    instance_id: str
    question: str
    samples: tuple[Sample, ...]
    generator_logprob: dict[str, tuple[float, float]]
    verifier_logprob: dict[str, tuple[float, float]]
    gold_answer: str
    image_ref: str | None = None
    gold_embedding: tuple[float, ...] | None = None

    def candidate_set(self, cfg: GameConfig | None = None) -> CandidateSet:
        return build_candidate_set(((s.raw_text, s.embedding) for s in self.samples), cfg)

    def init_scores(self, cset: CandidateSet) -> InitScores:
        g = np.array([self.generator_logprob[t] for t in cset.texts], dtype=np.float64)
        v = np.array([self.verifier_logprob[t] for t in cset.texts], dtype=np.float64)
        return InitScores(g, v)

    def greedy_sample(self) -> Sample:
        """The designated greedy sample, else the first one at the lowest temperature."""
        for s in self.samples:
            if s.greedy:
                return s
        lowest = min(s.temperature for s in self.samples)
        return next(s for s in self.samples if s.temperature == lowest)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "schema": SCHEMA,
            "instance_id": self.instance_id,
            "question": self.question,
            "image_ref": self.image_ref,
            "samples": [
                {
                    "raw_text": s.raw_text,
                    "temperature": s.temperature,
                    "embedding": list(s.embedding),
                    **({"greedy": True} if s.greedy else {}),
                }
                for s in self.samples
            ],
            "generator_logprob": {k: dict(zip(LABELS, v)) for k, v in self.generator_logprob.items()},
            "verifier_logprob": {k: dict(zip(LABELS, v)) for k, v in self.verifier_logprob.items()},
            "gold_answer": self.gold_answer,
        }
        if self.gold_embedding is not None:
            out["gold_embedding"] = list(self.gold_embedding)
        return out


def _require(obj: Mapping, key: str, kind, iid, path: str):
    if key not in obj:
        raise SchemaError(f"missing field '{key}'", iid, path + key)
    val = obj[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise SchemaError(f"'{key}' must be a number", iid, path + key)
        return float(val)
    if not isinstance(val, kind):
        raise SchemaError(f"'{key}' must be {kind.__name__}", iid, path + key)
    return val


def _vector(val, iid, path: str) -> tuple[float, ...]:
    if not isinstance(val, list) or not val:
        raise SchemaError("embedding must be a non-empty array of numbers", iid, path)
    out = []
    for k, x in enumerate(val):
        if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
            raise SchemaError("embedding entries must be finite numbers", iid, f"{path}[{k}]")
        out.append(float(x))
    return tuple(out)


def _score_map(obj: Mapping, key: str, iid) -> dict[str, tuple[float, float]]:
    raw = _require(obj, key, dict, iid, "")
    out = {}
    for text, pair in raw.items():
        where = f"{key}[{text!r}]"
        if not isinstance(pair, dict):
            raise SchemaError("expected an object with 'correct' and 'incorrect'", iid, where)
        vals = []
        for label in LABELS:
            x = _require(pair, label, float, iid, where + ".")
            if not math.isfinite(x) or x > 0:
                raise SchemaError(f"log-probability must be finite and <= 0, got {x!r}", iid, f"{where}.{label}")
            vals.append(x)
        out[text] = (vals[0], vals[1])
    return out


def instance_from_dict(obj: Any, index: int = 0, cfg: GameConfig | None = None) -> InstanceTrace:
    if not isinstance(obj, dict):
        raise SchemaError("instance must be a JSON object", None, f"[{index}]")
    iid = obj.get("instance_id")
    if obj.get("schema") != SCHEMA:
        raise SchemaError(f"schema must be {SCHEMA!r}, got {obj.get('schema')!r}", iid, "schema")
    iid = _require(obj, "instance_id", str, iid, "")
    question = _require(obj, "question", str, iid, "")
    image_ref = obj.get("image_ref")
    if image_ref is not None and not isinstance(image_ref, str):
        raise SchemaError("'image_ref' must be a string or null", iid, "image_ref")
    raw_samples = _require(obj, "samples", list, iid, "")
    if not raw_samples:
        raise SchemaError("samples must be non-empty", iid, "samples")
    samples = []
    for k, s in enumerate(raw_samples):
        where = f"samples[{k}]"
        if not isinstance(s, dict):
            raise SchemaError("sample must be an object", iid, where)
        greedy = s.get("greedy", False)
        if not isinstance(greedy, bool):
            raise SchemaError("'greedy' must be a boolean", iid, where + ".greedy")
        samples.append(
            Sample(
                _require(s, "raw_text", str, iid, where + "."),
                _require(s, "temperature", float, iid, where + "."),
                _vector(s.get("embedding"), iid, where + ".embedding"),
                greedy,
            )
        )
    dims = {len(s.embedding) for s in samples}
    gold_embedding = None
    if obj.get("gold_embedding") is not None:
        gold_embedding = _vector(obj["gold_embedding"], iid, "gold_embedding")
        dims.add(len(gold_embedding))
    if len(dims) != 1:
        raise EmbeddingDimMismatch(f"instance {iid!r}: mixed embedding dimensions {sorted(dims)}")
    trace = InstanceTrace(
        instance_id=iid,
        question=question,
        samples=tuple(samples),
        generator_logprob=_score_map(obj, "generator_logprob", iid),
        verifier_logprob=_score_map(obj, "verifier_logprob", iid),
        gold_answer=_require(obj, "gold_answer", str, iid, ""),
        image_ref=image_ref,
        gold_embedding=gold_embedding,
    )
    validate_coverage(trace, cfg)
    return trace


def validate_coverage(trace: InstanceTrace, cfg: GameConfig | None = None) -> None:
    """Every candidate the set builder would accept must have both score rows."""
    try:
        cset = trace.candidate_set(cfg)
    except EmbeddingDimMismatch as exc:
        raise EmbeddingDimMismatch(f"instance {trace.instance_id!r}: {exc}") from None
    except EmptyAfterCanonicalization as exc:
        raise SchemaError(str(exc), trace.instance_id, "samples") from None
    for text in cset.texts:
        for key, table in (("generator_logprob", trace.generator_logprob), ("verifier_logprob", trace.verifier_logprob)):
            if text not in table:
                raise SchemaError(f"no {key} entry for candidate {text!r}", trace.instance_id, f"{key}[{text!r}]")


def load_trace(path: str | os.PathLike, cfg: GameConfig | None = None) -> list[InstanceTrace]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(data, list):
        raise SchemaError("top level must be an array of instances", None, "$")
    return [instance_from_dict(obj, i, cfg) for i, obj in enumerate(data)]


def dump_traces(traces: Iterable[InstanceTrace]) -> str:
    return json.dumps([t.to_dict() for t in traces], indent=1, ensure_ascii=False) + "\n"


def save_trace(traces: Sequence[InstanceTrace], path: str | os.PathLike) -> None:
    Path(path).write_text(dump_traces(traces), encoding="utf-8")


def canonical_key(raw: str) -> str:
    """Key under which scores for a raw answer are stored."""
    return canonicalize(raw)
