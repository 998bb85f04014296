import csv
import json
from fractions import Fraction

import numpy as np
import pytest

from quickselect_lab import analytic as an
from quickselect_lab.core import AdaptivePolicy, Method, SamplingScheme
from quickselect_lab.engine import preset_sqs2
from quickselect_lab.solver import (
    GridFunction,
    NotConverged,
    TStops,
    apply_operator,
    curve_export,
    estimate_a_empirical,
    grid_of,
    load_policy_config,
    policy_coefficients,
    snap_breakpoints,
    solve_fixed_point,
)

CQS = AdaptivePolicy.single(Method.CLASSIC, (0, 0))
YQS = AdaptivePolicy.single(Method.YBB, (0, 0, 0))
WAT = AdaptivePolicy.single(Method.WATERLOO, (0, 0, 0, 0))


def test_tstops():
    ts = TStops.of(SamplingScheme((1, 0, 2)))
    assert ts.left == (-1, 1, 2) and ts.right == (3, 2, -1)
    sc = SamplingScheme((1, 0, 2))
    for ell in range(sc.s):
        if 0 < ell < sc.s - 1:
            assert ts.left[ell] + sc.t[ell] + ts.right[ell] + 2 == sc.k


def test_snapping_is_mirror_symmetric():
    nodes = snap_breakpoints((0.0, 0.1035, 0.8965, 1.0), 400)
    assert nodes[1] + nodes[2] == 400
    with pytest.raises(ValueError):
        snap_breakpoints((0.0, 0.5, 0.5001, 1.0), 100)


def test_apply_to_zero_gives_toll():
    pol = preset_sqs2().policy
    zero = grid_of(lambda a: 0.0, pol, 200)
    out = apply_operator(zero, pol, [1.0, 4 / 3, 1.0])
    assert np.allclose(out.values[:10], 1.0)
    assert np.allclose(out.values[100], 4 / 3)


def test_apply_to_one_gives_expected_segment_size():
    # with f = 1 the integrals add up to E[size of the segment holding alpha]; at alpha = 1/2 for
    # t = (0, 0) that is 1 - 2 E[min(U, 1/2) ...] = 3/4
    f = grid_of(lambda a: 1.0, CQS, 400)
    out = apply_operator(f, CQS, [0.0001])
    assert out(0.5) - 0.0001 == pytest.approx(0.75, abs=1e-6)
    assert out(0.0) - 0.0001 == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("pol,a,curve", [
    (CQS, 1.0, an.f_cqs), (YQS, 4 / 3, an.f_yqs), (YQS, 19 / 12, an.f_yqs),
])
def test_closed_forms_are_fixed_points(pol, a, curve):
    for N in (128, 512):
        exact = grid_of(lambda x: curve(x, a), pol, N)
        assert apply_operator(exact, pol, [a]).sup_distance(exact) <= 5 / N


def test_solve_classic_and_yqs():
    sol = solve_fixed_point(CQS, [1.0], 512, 1e-7)
    assert sol.f.sup_distance(lambda x: an.f_cqs(x, 1)) <= 1e-3
    assert sol.residual <= 1e-6
    sol = solve_fixed_point(YQS, [4 / 3], 512, 1e-7)
    assert sol.f(0.5) == pytest.approx(2.924, abs=2e-3)


def test_solve_sqs2():
    pol = preset_sqs2().policy
    sol = solve_fixed_point(pol, policy_coefficients(pol, "SE"), 512, 1e-7)
    f = sol.f
    assert f(0.0) == pytest.approx(1.5, abs=1e-6)
    assert f(0.5) == pytest.approx(2.843, abs=5e-3)
    assert f.integral() == pytest.approx(2.5004, abs=1e-3)
    assert sol.residual <= 10 * 1e-7
    assert f.max_asymmetry() <= 2 * 1e-7


@pytest.mark.parametrize("pol,a,expected", [
    (CQS, 1.0, 3.0), (YQS, 4 / 3, 8 / 3), (WAT, 1.5, 2.5), (YQS, 19 / 12, 19 / 6),
])
def test_grand_average_matches_a_over_h(pol, a, expected):
    assert solve_fixed_point(pol, [a], 400).f.integral() == pytest.approx(expected, abs=2e-3)


def test_grid_refinement():
    exact = lambda x: an.f_yqs(x, 4 / 3)
    errs = [solve_fixed_point(YQS, [4 / 3], N, 1e-9).f.sup_distance(exact) for N in (100, 200, 400)]
    assert errs[1] <= errs[0] and errs[2] <= errs[1]
    # at least first order
    assert errs[2] <= errs[0] / 4 * 3


def test_median_of_three_below_yqs_comparisons():
    m3 = solve_fixed_point(AdaptivePolicy.single(Method.CLASSIC, (1, 1)), [1.0], 400).f
    yqs = lambda x: an.f_yqs(x, 19 / 12)
    assert np.all(m3.values < yqs(m3.alpha))


def test_non_convergence_reported():
    with pytest.raises(NotConverged) as exc:
        solve_fixed_point(YQS, [4 / 3], 200, tol=1e-14, max_iter=3)
    assert len(exc.value.history) == 3


def test_solver_validation():
    with pytest.raises(ValueError):
        solve_fixed_point(CQS, [1.0], 50)
    with pytest.raises(ValueError):
        solve_fixed_point(CQS, [1.0, 2.0], 200)
    with pytest.raises(ValueError):
        solve_fixed_point(CQS, [-1.0], 200)


def test_grid_function_behaviour():
    f = GridFunction(4, [0, 1, 2, 3, 4], {2: 10.0})
    assert f(0.375) == pytest.approx(5.5)  # cell [1/4, 1/2] ends at the left limit 10
    assert f(0.5) == 2.0
    assert f(0.625) == pytest.approx(2.5)
    assert f(1.0) == 4.0
    with pytest.raises(ValueError):
        GridFunction(3, [1, 2])


def test_curve_export(tmp_path):
    p = tmp_path / "c.csv"
    curve_export(GridFunction(4, np.ones(5)), p)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["alpha", "value"]
    assert len(rows) == 6 and all(float(r[1]) == 1 for r in rows[1:])
    sol = solve_fixed_point(CQS, [1.0], 200)
    curve_export(sol.f, p)
    vals = np.array([float(r[1]) for r in list(csv.reader(open(p)))[1:]])
    assert np.argmax(vals) == 100


def test_sqs2_curve_has_kinks():
    pol = preset_sqs2().policy
    f = solve_fixed_point(pol, policy_coefficients(pol, "SE"), 500).f
    i = snap_breakpoints(pol.breakpoints, 500)[1]
    left = f.values[i - 1] - f.values[i - 2]
    right = f.values[i + 2] - f.values[i + 1]
    assert abs(left - right) > 1e-3


def test_estimate_a_empirical():
    for method, t, measure, expected in [
        (Method.YBB, (0, 0, 0), "C", 19 / 12),
        (Method.CLASSIC, (0, 0), "SE", 1.0),
        (Method.WATERLOO, (0, 0, 0, 0), "C", 2.0),
    ]:
        mean, se = estimate_a_empirical(method, t, measure, n=20_000, trials=20_000, rng=1)
        assert abs(mean / expected - 1) < 0.005
        assert se < 0.003


def test_policy_config(tmp_path):
    doc = {
        "breakpoints": [0, 0.3, 0.7, 1],
        "segments": [
            {"method": "classic", "t": [0, 1]},
            {"method": "ybb", "t": [0, 0, 0], "a": {"SE": 1.3333333333333333}},
            {"method": "classic", "t": [1, 0]},
        ],
    }
    path = tmp_path / "p.json"
    path.write_text(json.dumps(doc))
    pol, coeffs = load_policy_config(path, "SE")
    assert pol.d == 3 and coeffs == [1.0, 4 / 3, 1.0]
    doc["segments"][1] = {"method": "ybb", "t": [0, 0, 1]}
    path.write_text(json.dumps(doc))
    pol, coeffs = load_policy_config(path, "C", n=5000, trials=2000)
    assert 1.4 < coeffs[1] < 1.7
    path.write_text(json.dumps({"breakpoints": [0, 1]}))
    with pytest.raises(ValueError):
        load_policy_config(path)


def test_sqs2_coefficient_fill():
    pol = preset_sqs2().policy
    assert policy_coefficients(pol, "SE") == [1.0, 4 / 3, 1.0]
    assert policy_coefficients(pol, "C") == [1.0, 19 / 12, 1.0]
    assert float(Fraction(19, 12)) == policy_coefficients(pol, "C")[1]
