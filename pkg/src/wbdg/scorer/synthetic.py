"""Synthetic instances with clustered near-synonym candidates.

A stand-in for a vision-language model: candidates come in clusters of
synonyms at a prescribed cosine distance, and label log-probabilities
favour one cluster with noisy logits.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from ..core import GameConfig
from ..errors import ConfigError, InfeasibleGeometry, SchemaError
from .rng import XorShift64Star, derive_seed
from .trace import InstanceTrace, Sample

SUITE_SCHEMA = "bdg-synth/1"

# surface variants cycled over samples; all canonicalize to the bare answer
_SURFACE_FORMS = (
    "{text}",
    "The answer is {text}.",
    "It is the {text}. Further review is advised.",
    "{Text}!",
    "Answer: {text}",
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_clusters: int = 2
    cluster_sizes: tuple[int, ...] = (3, 3)
    intra_cluster_distance: float = 0.05
    inter_cluster_distance: float = 0.9
    generator_noise: float = 0.3
    verifier_noise: float = 0.3
    correct_cluster: int = 0
    seed: int = 0
    # logit offsets of correct vs other clusters before noise
    generator_margin: float = 0.5
    verifier_margin: float = 1.0
    duplicate_samples: int = 1
    instance_id: str | None = None

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.cluster_sizes)
        object.__setattr__(self, "cluster_sizes", sizes)
        if self.n_clusters < 1 or len(sizes) != self.n_clusters:
            raise ConfigError(f"cluster_sizes {sizes} does not match n_clusters={self.n_clusters}")
        if any(s < 1 for s in sizes):
            raise ConfigError("every cluster needs at least one member")
        if not 0 <= self.correct_cluster < self.n_clusters:
            raise ConfigError(f"correct_cluster {self.correct_cluster} out of range")
        for name in ("intra_cluster_distance", "inter_cluster_distance"):
            d = getattr(self, name)
            if not 0.0 <= d <= 2.0:
                raise ConfigError(f"{name} must lie in [0, 2], got {d!r}")
        if not self.intra_cluster_distance < self.inter_cluster_distance:
            raise ConfigError("intra_cluster_distance must be smaller than inter_cluster_distance")
        for name in ("generator_noise", "verifier_noise", "generator_margin", "verifier_margin"):
            if not math.isfinite(getattr(self, name)) or getattr(self, name) < 0:
                raise ConfigError(f"{name} must be finite and >= 0")
        if self.duplicate_samples < 0:
            raise ConfigError("duplicate_samples must be >= 0")

    @property
    def n(self) -> int:
        return sum(self.cluster_sizes)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["cluster_sizes"] = list(self.cluster_sizes)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SyntheticSpec":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown synthetic spec keys: {', '.join(unknown)}")
        data = dict(data)
        if "cluster_sizes" in data:
            data["cluster_sizes"] = tuple(data["cluster_sizes"])
        return cls(**data)


def semidefinite_cholesky(gram: list[list[float]], tol: float = 1e-12) -> list[list[float]]:
    """Lower-triangular L with L L^T = gram, allowing rank deficiency.

    Pure-Python arithmetic so the factor is reproducible bit for bit.
    Raises ``InfeasibleGeometry`` when ``gram`` is not positive semidefinite.
    """
    n = len(gram)
    L = [[0.0] * n for _ in range(n)]
    for j in range(n):
        d = gram[j][j] - sum(L[j][k] ** 2 for k in range(j))
        if d < -1e-10:
            raise InfeasibleGeometry(f"Gram matrix is not positive semidefinite (pivot {j} = {d:.3e})")
        if d <= tol:
            # dependent direction: remaining entries in this column must already match
            for i in range(j + 1, n):
                resid = gram[i][j] - sum(L[i][k] * L[j][k] for k in range(j))
                if abs(resid) > 1e-9:
                    raise InfeasibleGeometry(f"Gram matrix is not positive semidefinite (column {j})")
            continue
        L[j][j] = math.sqrt(d)
        for i in range(j + 1, n):
            L[i][j] = (gram[i][j] - sum(L[i][k] * L[j][k] for k in range(j))) / L[j][j]
    return L


def cluster_embeddings(spec: SyntheticSpec) -> list[tuple[float, ...]]:
    """Unit vectors whose pairwise cosine distances follow the cluster pattern."""
    members = [c for c, size in enumerate(spec.cluster_sizes) for _ in range(size)]
    n = len(members)
    gram = [
        [
            1.0
            if i == j
            else 1.0 - (spec.intra_cluster_distance if members[i] == members[j] else spec.inter_cluster_distance)
            for j in range(n)
        ]
        for i in range(n)
    ]
    return [tuple(row) for row in semidefinite_cholesky(gram)]


def _log_sigmoid(z: float) -> float:
    # log(1 / (1 + exp(-z))), never positive
    if z >= 0:
        return -math.log1p(math.exp(-z))
    return z - math.log1p(math.exp(z))


def candidate_text(cluster: int, member: int) -> str:
    return f"finding {cluster} synonym {member}"


def synthesize_instance(spec: SyntheticSpec, n_candidates: int | None = None) -> InstanceTrace:
    """Build one deterministic instance from ``spec``.

    The greedy sample is the candidate with the largest generator logit; the
    remaining candidates follow in cluster order, then ``duplicate_samples``
    re-phrasings of earlier answers. Gold is the first member of the
    correct cluster.
    """
    if n_candidates is not None and spec.n > n_candidates:
        raise ConfigError(f"{spec.n} candidates exceed the cap of {n_candidates}")
    rng = XorShift64Star(spec.seed)
    members = [(c, m) for c, size in enumerate(spec.cluster_sizes) for m in range(size)]
    texts = [candidate_text(c, m) for c, m in members]
    embeddings = cluster_embeddings(spec)
    sign = [1.0 if c == spec.correct_cluster else -1.0 for c, _ in members]
    z_gen = [spec.generator_margin * s + spec.generator_noise * rng.normal() for s in sign]
    z_ver = [spec.verifier_margin * s + spec.verifier_noise * rng.normal() for s in sign]

    gen = {t: (_log_sigmoid(z), _log_sigmoid(-z)) for t, z in zip(texts, z_gen)}
    ver = {t: (_log_sigmoid(z), _log_sigmoid(-z)) for t, z in zip(texts, z_ver)}

    greedy = max(range(len(texts)), key=lambda i: (z_gen[i], -i))
    order = [greedy] + [i for i in range(len(texts)) if i != greedy]
    order += order[: spec.duplicate_samples]
    samples = []
    for k, i in enumerate(order):
        form = _SURFACE_FORMS[k % len(_SURFACE_FORMS)]
        raw = form.format(text=texts[i], Text=texts[i].capitalize())
        samples.append(Sample(raw, 0.5 if k % 2 == 0 else 1.0, embeddings[i], greedy=(k == 0)))

    gold = members.index((spec.correct_cluster, 0))
    iid = spec.instance_id if spec.instance_id is not None else f"synth-{spec.seed:016x}"
    return InstanceTrace(
        instance_id=iid,
        question=f"Which finding is shown? ({iid})",
        samples=tuple(samples),
        generator_logprob=gen,
        verifier_logprob=ver,
        gold_answer=texts[gold],
        image_ref=None,
        gold_embedding=embeddings[gold],
    )


@dataclass(frozen=True)
class SyntheticSuite:
    """A family of instances re-drawn for every evaluation seed."""

    template: SyntheticSpec = field(default_factory=SyntheticSpec)
    n_instances: int = 200
    seed: int = 0
    config: dict[str, Any] = field(default_factory=dict)

    def instances(self, run_seed: int) -> list[InstanceTrace]:
        return [
            synthesize_instance(
                replace(self.template, seed=derive_seed(self.seed, run_seed, k), instance_id=f"synth-{k:04d}")
            )
            for k in range(self.n_instances)
        ]

    def game_config(self, base: GameConfig | None = None) -> GameConfig:
        return (base or GameConfig()).with_overrides(self.config)

    def to_dict(self) -> dict[str, Any]:
        inst = self.template.to_dict()
        for k in ("seed", "instance_id"):
            inst.pop(k)
        return {
            "schema": SUITE_SCHEMA,
            "n_instances": self.n_instances,
            "seed": self.seed,
            "instance": inst,
            "config": dict(self.config),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SyntheticSuite":
        if not isinstance(data, dict) or data.get("schema") != SUITE_SCHEMA:
            raise SchemaError(f"synthetic suite must declare schema {SUITE_SCHEMA!r}", None, "schema")
        try:
            template = SyntheticSpec.from_dict(data.get("instance", {}))
            n = int(data.get("n_instances", 200))
            seed = int(data.get("seed", 0))
        except (TypeError, ValueError) as exc:
            raise SchemaError(str(exc), None, "instance") from None
        if n < 1:
            raise SchemaError("n_instances must be >= 1", None, "n_instances")
        config = data.get("config", {}) or {}
        if not isinstance(config, dict):
            raise SchemaError("config must be an object", None, "config")
        return cls(template, n, seed, config)


def load_suite(path: str | os.PathLike) -> SyntheticSuite:
    from ..errors import ParseError

    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    return SyntheticSuite.from_dict(data)
