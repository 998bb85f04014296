"""Monte-Carlo measurements of selection costs and their comparison with predictions."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import stats

from .analytic import (
    TABLE1,
    TABLE1_METHODS,
    TABLE2,
    TABLE2_APPROX,
    coefficient,
    grand_avg_leading,
    table2_analytic,
)
from .core import (
    Fixed,
    FixedQuantile,
    Method,
    RandomRank,
    SamplingScheme,
    describe_rank,
    make_input,
    resolve_rank,
    trial_rng,
)
from .engine import AlgorithmPreset, parse_preset, quickselect
from .partition import betabinomial_pmf, first_rounds

CSV_HEADER = (
    "preset,n,alpha,m,trials,comp_mean,comp_se,scan_mean,scan_se,"
    "write_mean,write_se,comp_norm,scan_norm,write_norm"
)


@dataclass(frozen=True)
class TrialStats:
    preset: str
    n: int
    rank: str
    trials: int
    mean: tuple
    std: tuple
    stderr: tuple
    alpha: Optional[float] = None
    m: Optional[int] = None
    max_depth: int = 0

    @property
    def norm(self) -> tuple:
        return tuple(x / self.n for x in self.mean)

    @property
    def norm_stderr(self) -> tuple:
        return tuple(x / self.n for x in self.stderr)

    def csv_row(self) -> list:
        c, s, w = self.mean
        ce, se, we = self.stderr
        alpha = "" if self.alpha is None else repr(float(self.alpha))
        m = "" if self.m is None else self.m
        return [self.preset, self.n, alpha, m, self.trials, c, ce, s, se, w, we, *self.norm]


def _preset(p) -> AlgorithmPreset:
    return parse_preset(p) if isinstance(p, str) else p


def _one_trial(preset, n, spec, seed, stream, i):
    rng = trial_rng(seed, i, stream)
    a = make_input(n, rng)
    res = quickselect(a, spec, preset, rng, inplace=True)
    return res.tally.as_tuple(), res.depth


def run_trials(preset, n: int, spec, trials: int, seed: int = 0, parallelism: int = 1,
               stream: int = 0) -> TrialStats:
    """Run ``trials`` independent selections; trial ``i`` depends only on (seed, stream, i)."""
    if trials < 1:
        raise ValueError("need at least one trial")
    preset = _preset(preset)
    costs = np.zeros((trials, 3), dtype=np.int64)
    depths = np.zeros(trials, dtype=np.int64)

    def chunk(idx):
        for i in idx:
            costs[i], depths[i] = _one_trial(preset, n, spec, seed, stream, i)

    if parallelism <= 1:
        chunk(range(trials))
    else:
        with ThreadPoolExecutor(parallelism) as pool:
            list(pool.map(chunk, [range(j, trials, parallelism) for j in range(parallelism)]))
    x = costs.astype(np.float64)
    mean = x.mean(axis=0)  # numpy reduces with pairwise summation
    std = x.std(axis=0, ddof=1) if trials > 1 else np.zeros(3)
    se = std / math.sqrt(trials)
    m = alpha = None
    if isinstance(spec, Fixed):
        m = spec.m
        alpha = m / n
    elif isinstance(spec, FixedQuantile):
        m = resolve_rank(spec, n)
        alpha = spec.alpha
    return TrialStats(preset.name, n, describe_rank(spec), trials, tuple(mean), tuple(std), tuple(se),
                      alpha, m, int(depths.max()))


def sweep_alpha(preset, n: int, grid_points: int, trials_per_point: int, seed: int = 0,
                parallelism: int = 1) -> list:
    """One TrialStats per alpha = i / (grid_points - 1), clipped to [1/n, 1]."""
    if grid_points < 2:
        raise ValueError("need at least two grid points")
    preset = _preset(preset)
    out = []
    for i in range(grid_points):
        alpha = min(max(i / (grid_points - 1), 1.0 / n), 1.0)
        m = min(n, max(1, math.ceil(Fraction(repr(alpha)) * n)))
        st = run_trials(preset, n, Fixed(m), trials_per_point, seed, parallelism, stream=i + 1)
        out.append(TrialStats(st.preset, n, st.rank, st.trials, st.mean, st.std, st.stderr, alpha, m,
                              st.max_depth))
    return out


def write_csv(rows, fh) -> None:
    """CSV with the fixed header; ``fh`` is a path or an open text file."""
    if isinstance(fh, (str, bytes)) or hasattr(fh, "__fspath__"):
        with open(fh, "w", newline="") as f:
            write_csv(rows, f)
        return
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER.split(","))
    for r in rows:
        w.writerow(r.csv_row())


def csv_text(rows) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# subproblem-size law
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SegmentFit:
    segment: int
    statistic: float
    dof: int
    pvalue: float


@dataclass(frozen=True)
class DistributionReport:
    method: str
    t: tuple
    n: int
    rounds: int
    segments: tuple
    level: float = 0.001

    @property
    def passed(self) -> bool:
        return all(s.pvalue > self.level for s in self.segments)


def _merge_small(observed, expected, minimum=5.0):
    """Pool adjacent cells until each expected count reaches ``minimum``."""
    obs, exp = [], []
    o_acc = e_acc = 0.0
    for o, e in zip(observed, expected):
        o_acc += o
        e_acc += e
        if e_acc >= minimum:
            obs.append(o_acc)
            exp.append(e_acc)
            o_acc = e_acc = 0.0
    if e_acc > 0 or o_acc > 0:
        if exp:
            obs[-1] += o_acc
            exp[-1] += e_acc
        else:
            obs.append(o_acc)
            exp.append(e_acc)
    return np.array(obs), np.array(exp)


def subproblem_distribution_test(method: Method, scheme, n: int, rounds: int, seed: int = 0,
                                 level: float = 0.001) -> DistributionReport:
    """Chi-square test of J_l - t_l against BetaBinomial(n - k, t_l + 1, k - t_l) per segment."""
    scheme = scheme if isinstance(scheme, SamplingScheme) else SamplingScheme(tuple(scheme))
    if n > 500:
        raise ValueError("n above 500 leaves too few rounds per cell")
    k = scheme.k
    _, sizes = first_rounds(method, scheme, n, rounds, trial_rng(seed, 0))
    fits = []
    support = np.arange(n - k + 1)
    for ell, t in enumerate(scheme.t):
        i = sizes[:, ell] - t
        if i.min() < 0 or i.max() > n - k:
            raise AssertionError(f"segment {ell + 1} size outside the possible range")
        observed = np.bincount(i, minlength=n - k + 1)
        expected = rounds * betabinomial_pmf(n - k, t + 1, k - t, support)
        obs, exp = _merge_small(observed, expected)
        exp = exp * obs.sum() / exp.sum()
        res = stats.chisquare(obs, exp)
        fits.append(SegmentFit(ell + 1, float(res.statistic), len(obs) - 1, float(res.pvalue)))
    return DistributionReport(method.value, scheme.t, n, rounds, tuple(fits), level)


# ---------------------------------------------------------------------------
# published tables
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    label: str
    measure: str
    published: float
    analytic: Optional[float]
    empirical: Optional[float]
    empirical_se: Optional[float] = None
    note: str = ""

    @property
    def rel_error(self) -> Optional[float]:
        if self.empirical is None:
            return None
        return abs(self.empirical - self.published) / self.published


_TABLE1_PRESETS = {2: "cqs", 3: "yqs", 4: "waterloo"}
_TABLE2_PRESETS = {"prop2": "prop2", "yqs": "yqs", "sqs2": "sqs2"}


def table_report(which: str, n: int, trials: int, seed: int = 0, parallelism: int = 1) -> list:
    """Published value, closed form and measurement, row by row."""
    rows = []
    if which == "table1":
        for s, (name, *published) in TABLE1.items():
            method = TABLE1_METHODS.get(s)
            st = None
            if method is not None:
                st = run_trials(_TABLE1_PRESETS[s], n, RandomRank(), trials, seed, parallelism)
            for col, measure in enumerate(("C", "SE", "WA")):
                analytic = emp = emp_se = None
                note = "fixture only" if method is None else ""
                if method is not None:
                    scheme = SamplingScheme((0,) * s)
                    try:
                        analytic = float(grand_avg_leading(coefficient(measure, method, scheme), scheme))
                    except ValueError:
                        note = "no closed form for this kernel"
                    emp, emp_se = st.norm[col], st.norm_stderr[col]
                label = f"s={s} {name}".rstrip()
                rows.append(ReportRow(label, measure, float(published[col]), analytic, emp, emp_se, note))
        return rows
    if which == "table2":
        specs = [("0", Fixed(1)), ("1/2", FixedQuantile(0.5)), ("avg", RandomRank())]
        cache = {}
        for (variant, measure), published in TABLE2.items():
            analytic = table2_analytic(variant, measure)
            approx = TABLE2_APPROX[(variant, measure)]
            for j, (where, spec) in enumerate(specs):
                key = (variant, where)
                if key not in cache:
                    cache[key] = run_trials(_TABLE2_PRESETS[variant], n, spec, trials, seed, parallelism)
                st = cache[key]
                col = ("C", "SE").index(measure)
                note = "published value rounded" if approx[j] else ""
                rows.append(ReportRow(f"{variant} alpha={where}", measure, published[j], analytic[j],
                                      st.norm[col], st.norm_stderr[col], note))
        return rows
    raise ValueError(f"unknown table {which!r}; use table1 or table2")


def format_report(rows) -> str:
    def fmt(x):
        return "-" if x is None else f"{x:.4f}"

    lines = [f"{'row':<22}{'measure':<9}{'published':>10}{'analytic':>10}{'empirical':>11}"
             f"{'+-se':>9}{'rel.err':>9}  note"]
    for r in rows:
        rel = "-" if r.rel_error is None else f"{100 * r.rel_error:.2f}%"
        lines.append(f"{r.label:<22}{r.measure:<9}{fmt(r.published):>10}{fmt(r.analytic):>10}"
                     f"{fmt(r.empirical):>11}{fmt(r.empirical_se):>9}{rel:>9}  {r.note}")
    return "\n".join(lines)
