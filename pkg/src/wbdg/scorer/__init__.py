"""Instance sources: recorded traces, synthetic suites and a live scoring server."""

from .remote import ScoringClient, remote_score
from .rng import XorShift64Star, derive_seed, splitmix64
from .synthetic import SyntheticSpec, SyntheticSuite, cluster_embeddings, load_suite, synthesize_instance
from .trace import InstanceTrace, Sample, dump_traces, load_trace, save_trace

__all__ = [
    "ScoringClient",
    "remote_score",
    "XorShift64Star",
    "derive_seed",
    "splitmix64",
    "SyntheticSpec",
    "SyntheticSuite",
    "cluster_embeddings",
    "load_suite",
    "synthesize_instance",
    "InstanceTrace",
    "Sample",
    "dump_traces",
    "load_trace",
    "save_trace",
]
