"""Cost-instrumented adaptive multiway Quickselect with its analytic companions."""

from .core import (
    AdaptivePolicy,
    CostTally,
    Fixed,
    FixedQuantile,
    Method,
    PartitionOutcome,
    PolicySegment,
    RandomRank,
    SamplingScheme,
    make_input,
    resolve_rank,
)
from .engine import AlgorithmPreset, parse_preset, quickselect

__version__ = "0.1.0"

__all__ = [
    "AdaptivePolicy",
    "AlgorithmPreset",
    "CostTally",
    "Fixed",
    "FixedQuantile",
    "Method",
    "PartitionOutcome",
    "PolicySegment",
    "RandomRank",
    "SamplingScheme",
    "make_input",
    "parse_preset",
    "quickselect",
    "resolve_rank",
]
