import csv
import io

import numpy as np
import pytest

from quickselect_lab.bench import (
    CSV_HEADER,
    csv_text,
    format_report,
    run_trials,
    subproblem_distribution_test,
    sweep_alpha,
    table_report,
    write_csv,
)
from quickselect_lab.core import Fixed, FixedQuantile, Method, RandomRank


def test_csv_header_exact():
    assert CSV_HEADER == ("preset,n,alpha,m,trials,comp_mean,comp_se,scan_mean,scan_se,"
                          "write_mean,write_se,comp_norm,scan_norm,write_norm")


def test_run_trials_deterministic_across_threads():
    a = run_trials("yqs", 3000, RandomRank(), 40, seed=5, parallelism=1)
    b = run_trials("yqs", 3000, RandomRank(), 40, seed=5, parallelism=4)
    assert a == b
    c = run_trials("yqs", 3000, RandomRank(), 40, seed=6)
    assert c.mean != a.mean


def test_trial_stats_fields():
    st = run_trials("cqs", 1000, FixedQuantile(0.3), 20, seed=1)
    assert st.m == 300 and st.alpha == 0.3 and st.trials == 20
    assert st.norm[0] == pytest.approx(st.mean[0] / 1000)
    assert all(s >= 0 for s in st.stderr)
    assert st.max_depth > 0
    with pytest.raises(ValueError):
        run_trials("cqs", 10, Fixed(1), 0)


def test_csv_round_trip(tmp_path):
    rows = [run_trials("cqs", 500, Fixed(7), 5, seed=2), run_trials("cqs", 500, RandomRank(), 5, seed=2)]
    text = csv_text(rows)
    parsed = list(csv.reader(io.StringIO(text)))
    assert ",".join(parsed[0]) == CSV_HEADER
    assert parsed[1][:5] == ["cqs", "500", repr(7 / 500), "7", "5"]
    assert parsed[2][2] == "" and parsed[2][3] == ""
    p = tmp_path / "out.csv"
    write_csv(rows, p)
    assert p.read_text() == text


def test_sweep_grid_and_streams():
    rows = sweep_alpha("cqs", 200, 5, 3, seed=1)
    assert [r.alpha for r in rows] == [1 / 200, 0.25, 0.5, 0.75, 1.0]
    assert [r.m for r in rows] == [1, 50, 100, 150, 200]


@pytest.mark.parametrize("method,t", [
    (Method.CLASSIC, (0, 0)), (Method.CLASSIC, (1, 1)), (Method.YBB, (0, 0, 0)), (Method.WATERLOO, (0, 1, 0, 0)),
])
def test_distribution_law(method, t):
    rep = subproblem_distribution_test(method, t, 100, 20_000, seed=3)
    assert rep.passed, rep.segments


def test_distribution_test_detects_wrong_law():
    # sizes from t = (1, 1) tested against the t = (0, 0) law must be rejected
    from quickselect_lab import bench
    from quickselect_lab.core import SamplingScheme

    real = bench.first_rounds

    def fake(method, scheme, n, rounds, rng):
        return real(method, SamplingScheme((1, 1)), n, rounds, rng)

    bench.first_rounds = fake
    try:
        rep = subproblem_distribution_test(Method.CLASSIC, (0, 0), 100, 20_000, seed=3)
    finally:
        bench.first_rounds = real
    assert not rep.passed


def test_distribution_test_rejects_large_n():
    with pytest.raises(ValueError):
        subproblem_distribution_test(Method.CLASSIC, (0, 0), 1000, 10)


def test_grand_average_identity():
    # RandomRank averages the fixed-rank costs over m
    n, trials = 60, 4000
    rr = run_trials("cqs", n, RandomRank(), trials, seed=11).mean[0]
    fixed = np.mean([run_trials("cqs", n, Fixed(m), trials // 10, seed=12).mean[0] for m in range(1, n + 1)])
    assert abs(rr - fixed) / fixed < 0.02


def test_table_report_structure():
    rows = table_report("table1", 2000, 20, seed=1)
    assert len(rows) == 7 * 3
    assert sum(r.note == "fixture only" for r in rows) == 4 * 3
    wat = [r for r in rows if r.label.startswith("s=4")]
    assert wat[0].analytic == pytest.approx(10 / 3) and wat[1].analytic == pytest.approx(2.5)
    rows2 = table_report("table2", 2000, 10, seed=1)
    assert len(rows2) == 6 * 3
    assert "published" in format_report(rows2).splitlines()[0]
    with pytest.raises(ValueError):
        table_report("table3", 100, 1)
