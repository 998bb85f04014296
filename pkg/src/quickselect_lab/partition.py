"""Instrumented in-place partitioning rounds.

Each kernel works on ``a[lo..hi]`` (inclusive) with its pivots already parked
at the boundary cells, and adds its costs to ``cnt = [C, SE, WA]``:

* C counts key comparisons, including those against a pivot.
* SE counts one per array cell read by a scanning index. A trailing index
  that only ever writes (the ``less`` index of YBB, ``a``/``d`` of Waterloo)
  counts one per cell it advances over.
* WA counts every store into the array; a swap is two stores.

Pivot-parking layouts:

=========  ==========================================
classic    pivot at ``hi``
YBB, BBY   ``p1`` at ``lo``, ``p2`` at ``hi``
Waterloo   ``p1`` at ``lo``, ``p2`` at ``lo+1``, ``p3`` at ``hi``
=========  ==========================================
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import betaln, gammaln

from .core import CostTally, Method, PartitionOutcome, SamplingScheme, rng_from

C, SE, WA = 0, 1, 2


@njit(cache=True, nogil=True)
def _swap(a, i, j, cnt):
    if i != j:
        tmp = a[i]
        a[i] = a[j]
        a[j] = tmp
        cnt[WA] += 2


@njit(cache=True, nogil=True)
def insertion_sort_kernel(a, lo, hi, cnt):
    for i in range(lo + 1, hi + 1):
        x = a[i]
        j = i - 1
        while j >= lo:
            cnt[C] += 1
            cnt[SE] += 1
            if a[j] > x:
                a[j + 1] = a[j]
                cnt[WA] += 1
                j -= 1
            else:
                break
        if j + 1 != i:
            a[j + 1] = x
            cnt[WA] += 1
    if hi > lo:
        cnt[SE] += hi - lo  # the outer index walks lo+1..hi


@njit(cache=True, nogil=True)
def sample_kernel(a, lo, hi, k, rng, cnt, draws):
    """Move a uniform k-subset of ``a[lo..hi]`` to ``a[lo..lo+k-1]`` and sort it.

    Partial Fisher-Yates; ``draws[i]`` receives the cell swapped into
    ``lo + i``.
    """
    for i in range(k):
        r = rng.integers(lo + i, hi + 1)
        draws[i] = r
        _swap(a, lo + i, r, cnt)
    # the sample is sorted in place; no scanning cost is charged for it
    se_before = cnt[SE]
    insertion_sort_kernel(a, lo, lo + k - 1, cnt)
    cnt[SE] = se_before


@njit(cache=True, nogil=True)
def hoare_kernel(a, lo, hi, cnt):
    """Partition ``a[lo..hi-1]`` around ``p = a[hi]``; returns p's final index."""
    p = a[hi]
    i = lo
    j = hi - 1
    while True:
        while i < hi:
            cnt[C] += 1
            cnt[SE] += 1
            if a[i] < p:
                i += 1
            else:
                break
        while j > i:
            cnt[C] += 1
            cnt[SE] += 1
            if a[j] > p:
                j -= 1
            else:
                break
        if j <= i:
            break
        _swap(a, i, j, cnt)
        i += 1
        j -= 1
    _swap(a, i, hi, cnt)
    return i


@njit(cache=True, nogil=True)
def ybb_kernel(a, lo, hi, cnt):
    """Yaroslavskiy-Bentley-Bloch dual-pivot partitioning.

    ``k`` scans left to right, classifying against ``p1`` first; ``g`` scans
    right to left against ``p2`` first; ``less`` trails over the small
    segment. Returns the final indices of both pivots.
    """
    p = a[lo]
    q = a[hi]
    less = lo + 1
    great = hi - 1
    k = less
    while k <= great:
        ak = a[k]
        cnt[C] += 1
        cnt[SE] += 1
        if ak < p:
            a[k] = a[less]
            a[less] = ak
            cnt[WA] += 2
            less += 1
            cnt[SE] += 1
        else:
            cnt[C] += 1
            if ak > q:
                crossed = False
                while True:
                    cnt[C] += 1
                    cnt[SE] += 1
                    if a[great] > q:
                        if great == k:
                            crossed = True
                            great -= 1
                            break
                        great -= 1
                    else:
                        break
                if crossed:
                    break
                cnt[C] += 1
                if a[great] < p:
                    a[k] = a[less]
                    a[less] = a[great]
                    cnt[WA] += 2
                    less += 1
                    cnt[SE] += 1
                else:
                    a[k] = a[great]
                    cnt[WA] += 1
                a[great] = ak
                cnt[WA] += 1
                great -= 1
        k += 1
    a[lo] = a[less - 1]
    a[less - 1] = p
    a[hi] = a[great + 1]
    a[great + 1] = q
    cnt[WA] += 4
    return less - 1, great + 1


@njit(cache=True, nogil=True)
def bby_kernel(a, lo, hi, cnt):
    """Mirror image of :func:`ybb_kernel`: the trailing index covers the large segment."""
    p = a[lo]
    q = a[hi]
    more = hi - 1
    small = lo + 1
    k = more
    while k >= small:
        ak = a[k]
        cnt[C] += 1
        cnt[SE] += 1
        if ak > q:
            a[k] = a[more]
            a[more] = ak
            cnt[WA] += 2
            more -= 1
            cnt[SE] += 1
        else:
            cnt[C] += 1
            if ak < p:
                crossed = False
                while True:
                    cnt[C] += 1
                    cnt[SE] += 1
                    if a[small] < p:
                        if small == k:
                            crossed = True
                            small += 1
                            break
                        small += 1
                    else:
                        break
                if crossed:
                    break
                cnt[C] += 1
                if a[small] > q:
                    a[k] = a[more]
                    a[more] = a[small]
                    cnt[WA] += 2
                    more -= 1
                    cnt[SE] += 1
                else:
                    a[k] = a[small]
                    cnt[WA] += 1
                a[small] = ak
                cnt[WA] += 1
                small += 1
        k -= 1
    a[hi] = a[more + 1]
    a[more + 1] = q
    a[lo] = a[small - 1]
    a[small - 1] = p
    cnt[WA] += 4
    return small - 1, more + 1


@njit(cache=True, nogil=True)
def waterloo_kernel(a, lo, hi, cnt):
    """Three-pivot four-way partitioning (Kushagra et al.).

    ``b`` and ``c`` meet in the middle, classifying every element against
    ``p2`` first and then against ``p1`` or ``p3``; ``ia`` and ``d`` trail
    over the two outer segments.
    """
    p = a[lo]
    q = a[lo + 1]
    r = a[hi]
    ia = lo + 2
    b = lo + 2
    c = hi - 1
    d = hi - 1
    while b <= c:
        while b <= c:
            cnt[C] += 1
            cnt[SE] += 1
            if a[b] < q:
                cnt[C] += 1
                if a[b] < p:
                    _swap(a, ia, b, cnt)
                    ia += 1
                    cnt[SE] += 1
                b += 1
            else:
                break
        while b <= c:
            cnt[C] += 1
            cnt[SE] += 1
            if a[c] > q:
                cnt[C] += 1
                if a[c] > r:
                    _swap(a, c, d, cnt)
                    d -= 1
                    cnt[SE] += 1
                c -= 1
            else:
                break
        if b <= c:
            # a[b] > q > a[c]
            cnt[C] += 2
            if a[b] > r:
                if a[c] < p:
                    _swap(a, b, ia, cnt)
                    _swap(a, ia, c, cnt)
                    ia += 1
                    cnt[SE] += 1
                else:
                    _swap(a, b, c, cnt)
                _swap(a, c, d, cnt)
                d -= 1
                cnt[SE] += 1
            else:
                if a[c] < p:
                    _swap(a, b, ia, cnt)
                    _swap(a, ia, c, cnt)
                    ia += 1
                    cnt[SE] += 1
                else:
                    _swap(a, b, c, cnt)
            b += 1
            c -= 1
    ia -= 1
    b -= 1
    c += 1
    d += 1
    _swap(a, lo + 1, ia, cnt)
    _swap(a, ia, b, cnt)
    ia -= 1
    _swap(a, lo, ia, cnt)
    _swap(a, hi, d, cnt)
    return ia, b, d


@njit(cache=True, nogil=True)
def park_pivots(a, lo, hi, t, s, layout, cnt):
    """Move the pivots of a sorted sample at ``a[lo..]`` to the kernel layout.

    ``layout``: 0 classic, 1 dual pivot, 2 Waterloo.
    """
    pos = np.empty(3, dtype=np.int64)
    acc = lo - 1
    for ell in range(s - 1):
        acc += t[ell] + 1
        pos[ell] = acc
    if layout == 0:
        _swap(a, pos[0], hi, cnt)
    elif layout == 1:
        _swap(a, pos[1], hi, cnt)
        _swap(a, pos[0], lo, cnt)
    else:
        _swap(a, pos[2], hi, cnt)
        _swap(a, pos[0], lo, cnt)
        _swap(a, pos[1], lo + 1, cnt)


@njit(cache=True, nogil=True)
def first_round_batch(a, code, t, rng, trials, shuffle):
    """Costs and segment sizes of ``trials`` first rounds on the permutation ``a``.

    ``code`` is a ``Method.code`` of a one-pass method (classic, YBB, BBY,
    Waterloo). With ``shuffle`` each round first reshuffles ``a``.
    """
    n = a.shape[0]
    s = t.shape[0]
    k = -1
    for ell in range(s):
        k += t[ell] + 1
    costs = np.zeros((trials, 3), dtype=np.int64)
    sizes = np.zeros((trials, s), dtype=np.int64)
    draws = np.zeros(k + 1, dtype=np.int64)
    pos = np.zeros(s + 1, dtype=np.int64)
    rc = np.zeros(3, dtype=np.int64)
    for r in range(trials):
        if shuffle:
            rng.shuffle(a)
        rc[:] = 0
        sample_kernel(a, 0, n - 1, k, rng, rc, draws)
        pos[0] = -1
        pos[s] = n
        if code == 0:
            park_pivots(a, 0, n - 1, t, s, 0, rc)
            pos[1] = hoare_kernel(a, 0, n - 1, rc)
        elif code == 1 or code == 2:
            park_pivots(a, 0, n - 1, t, s, 1, rc)
            if code == 1:
                r1, r2 = ybb_kernel(a, 0, n - 1, rc)
            else:
                r1, r2 = bby_kernel(a, 0, n - 1, rc)
            pos[1] = r1
            pos[2] = r2
        else:
            park_pivots(a, 0, n - 1, t, s, 2, rc)
            r1, r2, r3 = waterloo_kernel(a, 0, n - 1, rc)
            pos[1] = r1
            pos[2] = r2
            pos[3] = r3
        costs[r] = rc
        for ell in range(s):
            sizes[r, ell] = pos[ell + 1] - pos[ell] - 1
    return costs, sizes


_NUMPY_SHUFFLE_FROM = 4096


def first_rounds(method: Method, scheme: SamplingScheme, n: int, trials: int, rng):
    """Python front end of :func:`first_round_batch`; returns (costs, sizes)."""
    if method not in PARTITIONERS:
        raise ValueError(f"{method.value} is not a one-pass partitioning method")
    if method.arity != scheme.s:
        raise ValueError(f"{method.value} needs s={method.arity}, got t={scheme}")
    if n <= scheme.k:
        raise ValueError(f"n={n} must exceed the sample size {scheme.k}")
    t = np.array(scheme.t, dtype=np.int64)
    rng = rng_from(rng)
    a = np.arange(1, n + 1, dtype=np.int64)
    if n < _NUMPY_SHUFFLE_FROM:
        return first_round_batch(a, method.code, t, rng, trials, True)
    # the compiled shuffle is several times slower than numpy's on long arrays
    costs = np.zeros((trials, 3), dtype=np.int64)
    sizes = np.zeros((trials, scheme.s), dtype=np.int64)
    for r in range(trials):
        rng.shuffle(a)
        costs[r], sizes[r] = (x[0] for x in first_round_batch(a, method.code, t, rng, 1, False))
    return costs, sizes


# ---------------------------------------------------------------------------
# Python-level API
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleSelection:
    sample_positions: tuple[int, ...]
    sorted_sample: tuple[int, ...]
    pivots: tuple[int, ...]
    tally: CostTally


_LAYOUT = {2: 0, 3: 1, 4: 2}


class _Buffer:
    """int64 working copy of a view that writes itself back on exit."""

    def __init__(self, view):
        self.view = view
        self.buf = np.ascontiguousarray(view, dtype=np.int64)

    def __enter__(self):
        return self.buf

    def __exit__(self, *exc):
        if self.buf is not self.view:
            self.view[:] = self.buf if isinstance(self.view, np.ndarray) else self.buf.tolist()
        return False


def sample_pivots(view, scheme: SamplingScheme, rng, park: bool = True) -> SampleSelection:
    """Draw the sample of one round from ``view`` and pick its pivots.

    With ``park`` the pivots end at the cells the partitioning kernel of an
    ``s``-way method expects (see module docstring); their cost is included.
    """
    n = len(view)
    k = scheme.k
    if n < k:
        raise ValueError(f"view of size {n} is smaller than the sample size {k}; use the base case")
    rng = rng_from(rng)
    cnt = np.zeros(3, dtype=np.int64)
    draws = np.zeros(max(k, 1), dtype=np.int64)
    with _Buffer(view) as a:
        origin = np.arange(n)
        sample_kernel(a, 0, n - 1, k, rng, cnt, draws)
        for i in range(k):
            origin[[i, draws[i]]] = origin[[draws[i], i]]
        sorted_sample = tuple(int(x) for x in a[:k])
        t = np.array(scheme.t, dtype=np.int64)
        offsets = np.cumsum(t[:-1] + 1) - 1
        pivots = tuple(int(a[o]) for o in offsets)
        if park:
            if n == k:
                raise ValueError("cannot park pivots when the sample fills the whole view")
            park_pivots(a, 0, n - 1, t, scheme.s, _LAYOUT[scheme.s], cnt)
    return SampleSelection(
        sample_positions=tuple(int(x) for x in origin[:k]),
        sorted_sample=sorted_sample,
        pivots=pivots,
        tally=CostTally.from_counts(cnt),
    )


def _index_of(a, key) -> int:
    hits = np.flatnonzero(a == key)
    if len(hits) != 1:
        raise ValueError(f"pivot {key} must occur exactly once in the view")
    return int(hits[0])


def _park(a, key, target):
    i = _index_of(a, key)
    a[i], a[target] = a[target], a[i]


def hoare_partition(view, pivot) -> PartitionOutcome:
    """Classic Hoare-Sedgewick partitioning of the whole view around ``pivot``.

    The view is rearranged in place. Moving the pivot into place is not
    charged; only the partitioning pass is.
    """
    n = len(view)
    if n == 0:
        return PartitionOutcome((0, 1))
    cnt = np.zeros(3, dtype=np.int64)
    with _Buffer(view) as a:
        _park(a, pivot, n - 1)
        r = hoare_kernel(a, 0, n - 1, cnt)
    return PartitionOutcome((0, r + 1, n + 1), CostTally.from_counts(cnt))


def _dual(view, p1, p2, kernel) -> PartitionOutcome:
    if p1 == p2:
        raise ValueError("dual-pivot partitioning needs two distinct pivots")
    if p1 > p2:
        raise ValueError("pivots must be given in increasing order")
    n = len(view)
    cnt = np.zeros(3, dtype=np.int64)
    with _Buffer(view) as a:
        _park(a, p2, n - 1)
        _park(a, p1, 0)
        r1, r2 = kernel(a, 0, n - 1, cnt)
    return PartitionOutcome((0, r1 + 1, r2 + 1, n + 1), CostTally.from_counts(cnt))


def ybb_partition(view, p1, p2) -> PartitionOutcome:
    return _dual(view, p1, p2, ybb_kernel)


def bby_partition(view, p1, p2) -> PartitionOutcome:
    return _dual(view, p1, p2, bby_kernel)


def waterloo_partition(view, p1, p2, p3) -> PartitionOutcome:
    if not p1 < p2 < p3:
        raise ValueError("pivots must be strictly increasing")
    n = len(view)
    cnt = np.zeros(3, dtype=np.int64)
    with _Buffer(view) as a:
        _park(a, p3, n - 1)
        _park(a, p1, 0)
        _park(a, p2, 1)
        r1, r2, r3 = waterloo_kernel(a, 0, n - 1, cnt)
    return PartitionOutcome((0, r1 + 1, r2 + 1, r3 + 1, n + 1), CostTally.from_counts(cnt))


PARTITIONERS = {
    Method.CLASSIC: hoare_partition,
    Method.YBB: ybb_partition,
    Method.BBY: bby_partition,
    Method.WATERLOO: waterloo_partition,
}


def betabinomial_pmf(n, a, b, j):
    """P[X = j] for X ~ BetaBinomial(n, a, b); vectorised over ``j``."""
    if n < 0 or a <= 0 or b <= 0:
        raise ValueError(f"invalid beta-binomial parameters n={n}, a={a}, b={b}")
    j = np.asarray(j)
    if np.any((j < 0) | (j > n)):
        raise ValueError(f"outcome must lie in [0, {n}]")
    logp = (
        gammaln(n + 1) - gammaln(j + 1) - gammaln(n - j + 1)
        + betaln(a + j, b + n - j) - betaln(a, b)
    )
    p = np.exp(logp)
    return float(p) if p.ndim == 0 else p
