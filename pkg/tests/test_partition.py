import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quickselect_lab.core import Method, SamplingScheme, rng_from
from quickselect_lab.partition import (
    bby_partition,
    betabinomial_pmf,
    first_rounds,
    hoare_partition,
    sample_pivots,
    waterloo_partition,
    ybb_partition,
)


def _segments_ordered(view, outcome, pivots):
    ranks = outcome.pivot_ranks
    bounds = [-np.inf, *pivots, np.inf]
    for ell in range(1, len(ranks)):
        seg = view[ranks[ell - 1]:ranks[ell] - 1]
        if not np.all((seg > bounds[ell - 1]) & (seg < bounds[ell])):
            return False
    return all(view[r - 1] == p for r, p in zip(ranks[1:-1], pivots))


@st.composite
def views(draw, pivots):
    n = draw(st.integers(pivots, 300))
    seed = draw(st.integers(0, 2**32))
    rng = np.random.default_rng(seed)
    a = rng.permutation(n) + 1
    piv = sorted(rng.choice(a, pivots, replace=False).tolist())
    return a, piv


def test_hoare_hand_trace():
    v = np.array([2, 1, 3])
    out = hoare_partition(v, 2)
    assert out.pivot_ranks == (0, 2, 4)
    assert out.segment_sizes == (1, 1)
    assert v[1] == 2


def test_hoare_writes_back_to_lists():
    v = [3, 1, 2]
    hoare_partition(v, 2)
    assert v[1] == 2 and sorted(v) == [1, 2, 3]


def test_hoare_empty_view():
    out = hoare_partition(np.array([], dtype=np.int64), 1)
    assert out.segment_sizes == (0,)


@settings(max_examples=200)
@given(views(1))
def test_hoare_contract(case):
    a, (p,) = case
    n = len(a)
    v = a.copy()
    out = hoare_partition(v, p)
    assert sorted(v.tolist()) == list(range(1, n + 1))
    assert _segments_ordered(v, out, [p])
    t = out.tally
    assert abs(t.comparisons - (n - 1)) <= 2
    assert abs(t.scanned_elements - n) <= 2
    assert t.write_accesses % 2 == 0


def test_hoare_scanned_elements_per_call_large():
    rng = np.random.default_rng(3)
    for _ in range(20):
        v = rng.permutation(1000) + 1
        out = hoare_partition(v, int(rng.integers(1, 1001)))
        assert abs(out.tally.scanned_elements - 1000) <= 2


def test_dual_hand_trace():
    out = ybb_partition(np.array([1, 2, 3]), 1, 3)
    assert out.segment_sizes == (0, 1, 0)
    assert abs(out.tally.scanned_elements - 3) <= 4
    out = bby_partition(np.array([3, 2, 1]), 1, 3)
    assert out.segment_sizes == (0, 1, 0)


@settings(max_examples=200)
@given(views(2))
def test_ybb_and_bby_contracts(case):
    a, piv = case
    n = len(a)
    for fn, outer in ((ybb_partition, 0), (bby_partition, 2)):
        v = a.copy()
        out = fn(v, *piv)
        assert sorted(v.tolist()) == list(range(1, n + 1))
        assert _segments_ordered(v, out, piv)
        J = out.segment_sizes
        assert sum(J) == n - 2
        assert abs(out.tally.scanned_elements - (n + J[outer])) <= 4


def test_dual_rejects_bad_pivots():
    with pytest.raises(ValueError):
        ybb_partition(np.array([1, 2, 3]), 2, 2)
    with pytest.raises(ValueError):
        ybb_partition(np.array([1, 2, 3]), 3, 1)
    with pytest.raises(ValueError):
        ybb_partition(np.array([1, 2, 3]), 1, 7)


def test_ybb_comparison_discipline():
    # all elements between the pivots: each costs two comparisons on the left scan
    v = np.array([1, 2, 3, 4, 5, 6])
    out = ybb_partition(v, 1, 6)
    assert out.tally.comparisons == 2 * 4
    # all elements small: one comparison each
    v = np.array([10, 1, 2, 3, 4, 11])
    out = ybb_partition(v, 10, 11)
    assert out.tally.comparisons == 4


def test_waterloo_hand_trace():
    v = np.array([4, 1, 2, 3])
    out = waterloo_partition(v, 1, 2, 3)
    assert out.segment_sizes == (0, 0, 0, 1)
    assert v.tolist() == [1, 2, 3, 4]


@settings(max_examples=200)
@given(views(3))
def test_waterloo_contract(case):
    a, piv = case
    n = len(a)
    v = a.copy()
    out = waterloo_partition(v, *piv)
    assert sorted(v.tolist()) == list(range(1, n + 1))
    assert _segments_ordered(v, out, piv)
    J = out.segment_sizes
    assert abs(out.tally.scanned_elements - (n + J[0] + J[3])) <= 6
    assert abs(out.tally.comparisons - 2 * (n - 3)) <= 6


def test_waterloo_rejects_unordered():
    with pytest.raises(ValueError):
        waterloo_partition(np.arange(1, 6), 3, 2, 4)


def test_sample_median_of_three():
    rng = rng_from(1)
    for _ in range(50):
        view = rng.permutation(3) + 1
        sel = sample_pivots(view, SamplingScheme((1, 1)), rng, park=False)
        assert sel.pivots == (2,)
        assert sel.sorted_sample == (1, 2, 3)


def test_sample_two_largest_of_five():
    rng = rng_from(2)
    for _ in range(50):
        view = rng.permutation(40) + 1
        orig = view.copy()
        sel = sample_pivots(view, SamplingScheme((3, 0, 0)), rng)
        sample = sorted(orig[list(sel.sample_positions)].tolist())
        assert list(sel.sorted_sample) == sample
        assert sel.pivots == tuple(sample[3:])
        assert len(set(sel.sample_positions)) == 5
        # parked for dual-pivot partitioning
        assert view[0] == sel.pivots[0] and view[-1] == sel.pivots[1]


def test_sample_rejects_small_view():
    with pytest.raises(ValueError):
        sample_pivots(np.arange(1, 3), SamplingScheme((1, 1)), 0)


def test_sample_counts_sorting_costs():
    sel = sample_pivots(np.arange(50, 0, -1), SamplingScheme((2, 2)), rng_from(4))
    assert sel.tally.comparisons >= 4
    assert sel.tally.write_accesses > 0


@pytest.mark.parametrize("t,expected", [((0, 0, 0), 1 / 3), ((0, 0, 1), 1 / 4)])
def test_first_pivot_rank_mean(t, expected):
    # smallest of k sampled keys: Beta(1, k) has mean 1/(k+1)
    n = 10**4
    method = Method.YBB
    _, sizes = first_rounds(method, SamplingScheme(t), n, 20_000, rng_from(11))
    ranks = sizes[:, 0] + 1
    assert abs(ranks.mean() / n - expected) < 0.01


@pytest.mark.parametrize("method,t,expected", [
    (Method.YBB, (0, 0, 0), 4 / 3),
    (Method.BBY, (0, 0, 0), 4 / 3),
    (Method.WATERLOO, (0, 0, 0, 0), 3 / 2),
    (Method.CLASSIC, (0, 0), 1.0),
])
def test_first_round_scanned_elements(method, t, expected):
    n = 10**4
    costs, _ = first_rounds(method, SamplingScheme(t), n, 10_000, rng_from(12))
    assert abs(costs[:, 1].mean() / n - expected) < 0.01


def test_first_rounds_validation():
    with pytest.raises(ValueError):
        first_rounds(Method.SIM_YBB_LAZY, SamplingScheme((0, 0, 0)), 100, 1, 0)
    with pytest.raises(ValueError):
        first_rounds(Method.YBB, SamplingScheme((0, 0)), 100, 1, 0)
    with pytest.raises(ValueError):
        first_rounds(Method.CLASSIC, SamplingScheme((1, 1)), 3, 1, 0)


def test_betabinomial_examples():
    assert np.allclose(betabinomial_pmf(2, 1, 1, np.arange(3)), 1 / 3)
    assert betabinomial_pmf(0, 3, 5, 0) == pytest.approx(1.0)
    p = betabinomial_pmf(10, 2, 1, np.arange(11))
    assert p[10] == pytest.approx(11 / 66, rel=1e-12)
    assert np.allclose(p / (np.arange(11) + 1), p[0])


@given(st.integers(0, 400), st.integers(1, 8), st.integers(1, 8))
def test_betabinomial_sums_to_one(n, a, b):
    assert abs(betabinomial_pmf(n, a, b, np.arange(n + 1)).sum() - 1) < 1e-12


@pytest.mark.parametrize("args", [(-1, 1, 1, 0), (3, 0, 1, 0), (3, 1, -2, 0), (3, 1, 1, 4), (3, 1, 1, -1)])
def test_betabinomial_rejects_invalid(args):
    with pytest.raises(ValueError):
        betabinomial_pmf(*args)
