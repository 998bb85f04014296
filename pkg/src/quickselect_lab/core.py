"""Domain types shared by the selection engine, the analytic formulas and the solver.

Ranks are 1-based throughout. Keys are the distinct integers ``1..n``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Union

import numpy as np

#: Name of the bit generator backing every random stream in the package.
PRNG_NAME = "numpy.PCG64"
#: Bump when the way trial streams are derived from a seed changes.
PRNG_STREAM_VERSION = 1


class Method(enum.Enum):
    """Partitioning method of one round."""

    CLASSIC = "classic"
    YBB = "ybb"
    BBY = "bby"
    WATERLOO = "waterloo"
    # binary-partitioning simulations of the multiway methods
    SIM_WATERLOO_LAZY = "sim-waterloo-lazy"
    SIM_YBB_LAZY = "sim-ybb-lazy"
    SIM_YBB_ATOMIC = "sim-ybb-atomic"

    @property
    def arity(self) -> int:
        """Number of segments the method produces."""
        return _ARITY[self]

    @property
    def code(self) -> int:
        return _CODES[self]


_ARITY = {
    Method.CLASSIC: 2,
    Method.YBB: 3,
    Method.BBY: 3,
    Method.WATERLOO: 4,
    Method.SIM_WATERLOO_LAZY: 4,
    Method.SIM_YBB_LAZY: 3,
    Method.SIM_YBB_ATOMIC: 3,
}
_CODES = {m: i for i, m in enumerate(Method)}


@dataclass(frozen=True)
class SamplingScheme:
    """The vector ``t`` of sample elements omitted around each pivot.

    ``s = len(t)`` segments, sample size ``k = sum(t + 1) - 1`` and expected
    segment fractions ``tau = (t + 1) / (k + 1)``.
    """

    t: tuple[int, ...]

    def __post_init__(self):
        t = tuple(int(x) for x in self.t)
        if len(t) < 2:
            raise ValueError(f"sampling vector needs at least 2 entries, got {t}")
        if any(x < 0 for x in t):
            raise ValueError(f"sampling vector entries must be >= 0, got {t}")
        object.__setattr__(self, "t", t)

    @property
    def s(self) -> int:
        return len(self.t)

    @property
    def k(self) -> int:
        return sum(x + 1 for x in self.t) - 1

    @property
    def tau(self) -> tuple[Fraction, ...]:
        return tuple(Fraction(x + 1, self.k + 1) for x in self.t)

    def mirrored(self) -> "SamplingScheme":
        return SamplingScheme(tuple(reversed(self.t)))

    def __str__(self):
        return "(" + ",".join(map(str, self.t)) + ")"


@dataclass(frozen=True)
class PolicySegment:
    method: Method
    scheme: SamplingScheme

    def __post_init__(self):
        if self.method.arity != self.scheme.s:
            raise ValueError(
                f"{self.method.value} partitioning needs s={self.method.arity}, "
                f"got t={self.scheme}"
            )


@dataclass(frozen=True)
class AdaptivePolicy:
    """Piecewise-constant choice of (method, scheme) over the relative rank.

    ``breakpoints`` are ``0 = b_0 < b_1 < ... < b_d = 1``; segment ``v`` is
    used for ``alpha`` in ``[b_{v-1}, b_v)``, the last interval is closed at 1.
    """

    breakpoints: tuple[float, ...]
    segments: tuple[PolicySegment, ...]

    def __post_init__(self):
        bps = tuple(float(b) for b in self.breakpoints)
        segs = tuple(self.segments)
        if len(bps) != len(segs) + 1:
            raise ValueError("need exactly one more breakpoint than segments")
        if bps[0] != 0.0 or bps[-1] != 1.0:
            raise ValueError("breakpoints must start at 0 and end at 1")
        if any(b1 >= b2 for b1, b2 in zip(bps, bps[1:])):
            raise ValueError(f"breakpoints must be strictly increasing: {bps}")
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "segments", segs)

    @classmethod
    def single(cls, method: Method, t: Sequence[int]) -> "AdaptivePolicy":
        return cls((0.0, 1.0), (PolicySegment(method, SamplingScheme(tuple(t))),))

    @classmethod
    def from_pieces(cls, pieces: Sequence[tuple[float, Method, Sequence[int]]]) -> "AdaptivePolicy":
        """Build from ``(right_end, method, t)`` triples in increasing order."""
        bps = [0.0] + [float(p[0]) for p in pieces]
        segs = [PolicySegment(m, SamplingScheme(tuple(t))) for _, m, t in pieces]
        return cls(tuple(bps), tuple(segs))

    @property
    def d(self) -> int:
        return len(self.segments)

    @property
    def interior_breakpoints(self) -> tuple[float, ...]:
        return self.breakpoints[1:-1]

    @property
    def max_sample_size(self) -> int:
        return max(seg.scheme.k for seg in self.segments)

    def index(self, alpha: float) -> int:
        """Index of the interval containing ``alpha`` (half-open convention)."""
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        for v in range(self.d - 1, 0, -1):
            if alpha >= self.breakpoints[v]:
                return v
        return 0

    def lookup(self, alpha: float) -> PolicySegment:
        return self.segments[self.index(alpha)]

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        bps = self.breakpoints
        if any(abs(b + c - 1.0) > tol for b, c in zip(bps, reversed(bps))):
            return False
        return all(
            a.scheme.t == tuple(reversed(b.scheme.t))
            for a, b in zip(self.segments, reversed(self.segments))
        )


@dataclass(frozen=True)
class CostTally:
    """Counters of one run, one round, or any sum of those."""

    comparisons: int = 0
    scanned_elements: int = 0
    write_accesses: int = 0

    def __post_init__(self):
        if min(self.comparisons, self.scanned_elements, self.write_accesses) < 0:
            raise ValueError("cost counters cannot be negative")

    def __add__(self, other: "CostTally") -> "CostTally":
        if not isinstance(other, CostTally):
            return NotImplemented
        return CostTally(
            self.comparisons + other.comparisons,
            self.scanned_elements + other.scanned_elements,
            self.write_accesses + other.write_accesses,
        )

    def __radd__(self, other):
        # lets sum() start from 0
        if other == 0:
            return self
        return self.__add__(other)

    @classmethod
    def from_counts(cls, counts) -> "CostTally":
        c, se, wa = (int(x) for x in counts[:3])
        return cls(c, se, wa)

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.comparisons, self.scanned_elements, self.write_accesses)

    def get(self, measure: str) -> int:
        return self.as_tuple()[MEASURES.index(measure)]


#: Short names of the cost measures, in CostTally field order.
MEASURES = ("C", "SE", "WA")


@dataclass(frozen=True)
class Fixed:
    m: int


@dataclass(frozen=True)
class FixedQuantile:
    alpha: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"quantile must lie in (0, 1), got {self.alpha}")


@dataclass(frozen=True)
class RandomRank:
    pass


RankSpec = Union[Fixed, FixedQuantile, RandomRank]


def describe_rank(spec: RankSpec) -> str:
    if isinstance(spec, Fixed):
        return f"m={spec.m}"
    if isinstance(spec, FixedQuantile):
        return f"alpha={spec.alpha}"
    return "random"


@dataclass(frozen=True)
class PartitionOutcome:
    """Pivot ranks ``0 = R_0 < R_1 < ... < R_s = n + 1`` of one round."""

    pivot_ranks: tuple[int, ...]
    tally: CostTally = field(default_factory=CostTally)

    @property
    def n(self) -> int:
        return self.pivot_ranks[-1] - 1

    @property
    def s(self) -> int:
        return len(self.pivot_ranks) - 1

    @property
    def segment_sizes(self) -> tuple[int, ...]:
        r = self.pivot_ranks
        return tuple(r[i] - r[i - 1] - 1 for i in range(1, len(r)))


def rng_from(seed) -> np.random.Generator:
    """Generator for an int seed; Generators pass through unchanged."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed))))


def trial_rng(seed: int, trial: int, stream: int = 0) -> np.random.Generator:
    """Independent stream for one trial, keyed by ``(seed, stream, trial)`` only."""
    key = (int(trial),) if stream == 0 else (int(stream), int(trial))
    ss = np.random.SeedSequence(int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def make_input(n: int, seed) -> np.ndarray:
    """Uniformly random permutation of ``1..n`` (int64)."""
    if n < 1:
        raise ValueError(f"input size must be positive, got {n}")
    rng = rng_from(seed)
    a = np.arange(1, n + 1, dtype=np.int64)
    rng.shuffle(a)
    return a


def resolve_rank(spec: RankSpec, n: int, rng=None) -> int:
    if n < 1:
        raise ValueError(f"input size must be positive, got {n}")
    if isinstance(spec, Fixed):
        if not 1 <= spec.m <= n:
            raise ValueError(f"rank {spec.m} outside [1..{n}]")
        return int(spec.m)
    if isinstance(spec, FixedQuantile):
        # decimal reading of alpha: 0.1 * 10 must give 1, not 2
        return max(1, math.ceil(Fraction(repr(float(spec.alpha))) * n))
    if isinstance(spec, RandomRank):
        if rng is None:
            raise ValueError("a random rank needs a generator")
        return int(rng_from(rng).integers(1, n + 1))
    raise TypeError(f"unknown rank spec {spec!r}")
