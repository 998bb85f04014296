"""Recursive (iterative) selection driver with adaptive dispatch, and named presets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from numba import njit

from .core import (
    AdaptivePolicy,
    CostTally,
    Method,
    RankSpec,
    resolve_rank,
    rng_from,
)
from .partition import (
    _swap,
    bby_kernel,
    hoare_kernel,
    insertion_sort_kernel,
    park_pivots,
    sample_kernel,
    waterloo_kernel,
    ybb_kernel,
)

DEFAULT_CUTOFF = 32

_CLASSIC = Method.CLASSIC.code
_YBB = Method.YBB.code
_BBY = Method.BBY.code
_WATERLOO = Method.WATERLOO.code
_SIM_WL = Method.SIM_WATERLOO_LAZY.code
_SIM_YL = Method.SIM_YBB_LAZY.code
_SIM_YA = Method.SIM_YBB_ATOMIC.code

TRACE_COLUMNS = ("n", "m", "segment", "comparisons", "scanned_elements", "write_accesses")


@njit(cache=True, nogil=True)
def _record(trace, rows, n, m, v, rc):
    if rows == trace.shape[0]:
        bigger = np.zeros((2 * rows + 1, 6), dtype=np.int64)
        bigger[:rows] = trace
        trace = bigger
    trace[rows, 0] = n
    trace[rows, 1] = m
    trace[rows, 2] = v
    trace[rows, 3] = rc[0]
    trace[rows, 4] = rc[1]
    trace[rows, 5] = rc[2]
    return trace, rows + 1


@njit(cache=True, nogil=True)
def _select(a, m, bps, codes, tt, ss, n0, rng, cnt, want_trace):
    lo = 0
    hi = a.shape[0] - 1
    depth = 0
    rows = 0
    trace = np.zeros((64 if want_trace else 0, 6), dtype=np.int64)
    rc = np.zeros(3, dtype=np.int64)
    kmax = 0
    for j in range(codes.shape[0]):
        kj = -1
        for ell in range(ss[j]):
            kj += tt[j, ell] + 1
        kmax = max(kmax, kj)
    draws = np.zeros(kmax + 1, dtype=np.int64)
    off = np.zeros(4, dtype=np.int64)
    pos = np.zeros(5, dtype=np.int64)
    d = codes.shape[0]
    while True:
        n = hi - lo + 1
        rc[:] = 0
        if n < n0:
            insertion_sort_kernel(a, lo, hi, rc)
            cnt += rc
            if want_trace:
                trace, rows = _record(trace, rows, n, m, -1, rc)
            return a[lo + m - 1], depth, trace[:rows]
        alpha = m / n
        v = 0
        for j in range(d - 1, 0, -1):
            if alpha >= bps[j]:
                v = j
                break
        code = codes[v]
        s = ss[v]
        t = tt[v]
        k = -1
        for ell in range(s):
            k += t[ell] + 1
        sample_kernel(a, lo, hi, k, rng, rc, draws)
        acc = lo - 1
        for ell in range(s - 1):
            acc += t[ell] + 1
            off[ell] = acc
        m_abs = lo + m - 1
        pos[0] = lo - 1
        npiv = 0
        if code == _CLASSIC:
            park_pivots(a, lo, hi, t, s, 0, rc)
            pos[1] = hoare_kernel(a, lo, hi, rc)
            npiv = 1
        elif code == _YBB or code == _BBY:
            park_pivots(a, lo, hi, t, s, 1, rc)
            if code == _YBB:
                r1, r2 = ybb_kernel(a, lo, hi, rc)
            else:
                r1, r2 = bby_kernel(a, lo, hi, rc)
            pos[1] = r1
            pos[2] = r2
            npiv = 2
        elif code == _WATERLOO:
            park_pivots(a, lo, hi, t, s, 2, rc)
            r1, r2, r3 = waterloo_kernel(a, lo, hi, rc)
            pos[1] = r1
            pos[2] = r2
            pos[3] = r3
            npiv = 3
        elif code == _SIM_WL:
            # p1 at lo, p2 at hi-1, p3 at hi; split around p2 first
            _swap(a, off[2], hi, rc)
            _swap(a, off[0], lo, rc)
            _swap(a, off[1], hi - 1, rc)
            r2 = hoare_kernel(a, lo + 1, hi - 1, rc)
            if m_abs < r2:
                _swap(a, lo, r2 - 1, rc)
                pos[1] = hoare_kernel(a, lo, r2 - 1, rc)
                pos[2] = r2
            elif m_abs > r2:
                pos[1] = r2
                pos[2] = hoare_kernel(a, r2 + 1, hi, rc)
            else:
                pos[1] = r2
                pos[2] = hi + 1
            npiv = 2
        else:
            # simulated YBB: p1 at lo, p2 at hi; split around p2 first
            _swap(a, off[1], hi, rc)
            _swap(a, off[0], lo, rc)
            r2 = hoare_kernel(a, lo + 1, hi, rc)
            if code == _SIM_YA or m_abs < r2:
                _swap(a, lo, r2 - 1, rc)
                pos[1] = hoare_kernel(a, lo, r2 - 1, rc)
                pos[2] = r2
                npiv = 2
            else:
                pos[1] = r2
                npiv = 1
        pos[npiv + 1] = hi + 1
        cnt += rc
        if want_trace:
            trace, rows = _record(trace, rows, n, m, v, rc)
        depth += 1
        for ell in range(1, npiv + 1):
            if pos[ell] == m_abs:
                return a[m_abs], depth, trace[:rows]
        for ell in range(1, npiv + 2):
            if m_abs < pos[ell]:
                lo = pos[ell - 1] + 1
                hi = pos[ell] - 1
                break
        m = m_abs - lo + 1


@dataclass(frozen=True)
class AlgorithmPreset:
    name: str
    policy: AdaptivePolicy
    cutoff: int = DEFAULT_CUTOFF

    def __post_init__(self):
        need = self.policy.max_sample_size + 1
        if self.cutoff < need:
            raise ValueError(f"cutoff {self.cutoff} below max sample size + 1 = {need}")

    def arrays(self):
        """Flat arrays handed to the compiled driver."""
        segs = self.policy.segments
        width = max(seg.scheme.s for seg in segs)
        tt = np.zeros((len(segs), width), dtype=np.int64)
        for i, seg in enumerate(segs):
            tt[i, : seg.scheme.s] = seg.scheme.t
        return (
            np.array(self.policy.breakpoints, dtype=np.float64),
            np.array([seg.method.code for seg in segs], dtype=np.int64),
            tt,
            np.array([seg.scheme.s for seg in segs], dtype=np.int64),
        )


class SelectResult(NamedTuple):
    key: int
    tally: CostTally
    depth: int
    trace: Optional[np.ndarray] = None


def quickselect(array, spec: RankSpec, preset: AlgorithmPreset, rng, trace: bool = False,
                inplace: bool = False) -> SelectResult:
    """Return the m-th smallest key of ``array`` together with its cost tally.

    ``rng`` drives the rank draw (for a random rank) and every pivot sample.
    With ``trace`` the result carries one row per round (see ``TRACE_COLUMNS``;
    segment -1 marks the base case). The input is copied unless ``inplace``.
    """
    rng = rng_from(rng)
    a = np.asarray(array)
    if a.ndim != 1 or a.size == 0:
        raise ValueError("need a nonempty one-dimensional array")
    a = a.astype(np.int64, copy=not inplace)
    m = resolve_rank(spec, a.size, rng)
    if isinstance(preset, str):
        preset = parse_preset(preset)
    bps, codes, tt, ss = preset.arrays()
    cnt = np.zeros(3, dtype=np.int64)
    key, depth, rows = _select(a, m, bps, codes, tt, ss, preset.cutoff, rng, cnt, trace)
    return SelectResult(int(key), CostTally.from_counts(cnt), int(depth), rows if trace else None)


# ---------------------------------------------------------------------------
# presets
# ---------------------------------------------------------------------------

def _preset(name, policy, cutoff=None):
    if cutoff is None:
        cutoff = max(DEFAULT_CUTOFF, policy.max_sample_size + 1)
    return AlgorithmPreset(name, policy, cutoff)


def preset_cqs():
    return _preset("cqs", AdaptivePolicy.single(Method.CLASSIC, (0, 0)))


def preset_mok(k: int):
    if k < 1 or k % 2 == 0:
        raise ValueError(f"median-of-k needs odd k >= 1, got {k}")
    h = (k - 1) // 2
    return _preset(f"mok:{k}", AdaptivePolicy.single(Method.CLASSIC, (h, h)))


def preset_fixed(method: Method, t=None):
    """Non-adaptive preset for one multiway method (all-zero ``t`` by default)."""
    t = tuple(t) if t is not None else (0,) * method.arity
    base = {Method.YBB: "yqs", Method.BBY: "bby", Method.WATERLOO: "waterloo"}[method]
    name = base if not any(t) else f"{base}:{','.join(map(str, t))}"
    return _preset(name, AdaptivePolicy.single(method, t))


def preset_prop2(nu: float = 0.5):
    if not 0.0 < nu < 1.0:
        raise ValueError(f"PROP2 threshold must lie in (0, 1), got {nu}")
    policy = AdaptivePolicy.from_pieces([
        (nu, Method.CLASSIC, (0, 1)),
        (1.0, Method.CLASSIC, (1, 0)),
    ])
    return _preset(f"prop2:{nu:g}", policy)


def preset_sqs2(nu: Optional[float] = None):
    """Sesquickselect with a sample of two; ``nu`` defaults to the optimal threshold."""
    if nu is None:
        from .analytic import find_nu_star
        nu = find_nu_star("SE")
    nu = float(nu)
    if not 0.0 < nu <= 0.5:
        raise ValueError(f"Sesquickselect threshold must lie in (0, 1/2], got {nu}")
    if nu == 0.5:
        # no central interval left
        return AlgorithmPreset("sqs2:0.5", preset_prop2(0.5).policy, DEFAULT_CUTOFF)
    policy = AdaptivePolicy.from_pieces([
        (nu, Method.CLASSIC, (0, 1)),
        (1.0 - nu, Method.YBB, (0, 0, 0)),
        (1.0, Method.CLASSIC, (1, 0)),
    ])
    return _preset(f"sqs2:{nu:g}", policy)


# left halves of the SQSK policies, as (right end, t)
SQSK_LEFT = {
    3: [(0.1035, (0, 2)), (0.5, (0, 0, 1))],
    4: [(0.06, (0, 3)), (0.28, (0, 0, 2)), (0.5, (0, 1, 1))],
    5: [(0.036, (0, 4)), (0.153, (0, 0, 3)), (0.5, (0, 1, 2))],
    6: [(0.025, (0, 5)), (0.09, (0, 0, 4)), (0.38, (0, 1, 3)), (0.5, (1, 1, 2))],
    7: [(0.02, (0, 6)), (0.06, (0, 0, 5)), (0.2875, (0, 1, 4)), (0.465, (1, 1, 3)), (0.5, (1, 2, 2))],
}


def sqsk_policy(k: int) -> AdaptivePolicy:
    """Symmetric policy: the left half as listed, the right half its mirror image."""
    if k not in SQSK_LEFT:
        raise ValueError(f"SQSK presets exist for k in 3..7, got {k}")
    left = SQSK_LEFT[k]
    pieces = [(b, Method.CLASSIC if len(t) == 2 else Method.YBB, t) for b, t in left]
    lefts = [0.0] + [b for b, _ in left[:-1]]
    for b, (_, t) in zip(reversed(lefts), reversed(left)):
        method = Method.CLASSIC if len(t) == 2 else Method.BBY
        pieces.append((1.0 - b, method, tuple(reversed(t))))
    return AdaptivePolicy.from_pieces(pieces)


def preset_sqsk(k: int):
    if k == 2:
        return preset_sqs2()
    return _preset(f"sqsk:{k}", sqsk_policy(k))


def preset_simulation(variant: str):
    """``variant`` is WaterlooLazy, YBBLazy or YBBAtomic (case and dashes ignored)."""
    variants = {
        "waterloolazy": (Method.SIM_WATERLOO_LAZY, (0, 0, 0, 0)),
        "ybblazy": (Method.SIM_YBB_LAZY, (0, 0, 0)),
        "ybbatomic": (Method.SIM_YBB_ATOMIC, (0, 0, 0)),
    }
    key = variant.lower().removeprefix("sim-").replace("-", "")
    if key not in variants:
        raise ValueError(f"unknown simulation variant {variant!r}")
    method, t = variants[key]
    return _preset(method.value, AdaptivePolicy.single(method, t))


PRESET_NAMES = (
    "cqs", "mok:<k>", "yqs", "bby", "waterloo", "prop2:<nu>", "sqs2:<nu>", "sqsk:<k>",
    "sim-waterloo-lazy", "sim-ybb-lazy", "sim-ybb-atomic",
)


def parse_preset(name: str) -> AlgorithmPreset:
    """Build a preset from its stable name, e.g. ``sqs2:0.3`` or ``yqs:1,1,1``."""
    base, _, arg = name.strip().lower().partition(":")
    try:
        if base == "cqs" and not arg:
            return preset_cqs()
        if base == "mok":
            return preset_mok(int(arg))
        if base in ("yqs", "bby", "waterloo"):
            method = {"yqs": Method.YBB, "bby": Method.BBY, "waterloo": Method.WATERLOO}[base]
            t = tuple(int(x) for x in arg.split(",")) if arg else None
            return preset_fixed(method, t)
        if base == "prop2":
            return preset_prop2(float(arg) if arg else 0.5)
        if base == "sqs2":
            return preset_sqs2(float(arg) if arg else None)
        if base == "sqsk":
            return preset_sqsk(int(arg))
        if base.startswith("sim-") and not arg:
            return preset_simulation(base)
    except ValueError as exc:
        raise ValueError(f"bad preset {name!r}: {exc}") from None
    raise ValueError(f"unknown preset {name!r}; known: {', '.join(PRESET_NAMES)}")


def all_presets():
    """One representative instance of every preset family."""
    names = ["cqs", "mok:3", "yqs", "bby", "waterloo", "prop2", "sqs2", "sqs2:0.5",
             "sim-waterloo-lazy", "sim-ybb-lazy", "sim-ybb-atomic"]
    names += [f"sqsk:{k}" for k in SQSK_LEFT]
    return [parse_preset(n) for n in names]
