"""Closed-form leading-term coefficients and fixed-quantile cost curves.

All curves are normalized by n: ``f(alpha)`` is the limit of E[cost]/n when
the sought rank is ``alpha * n``. Grand averages are integrals of these
curves over ``alpha``.

The Sesquickselect constants are evaluated with mpmath because the
rational-logarithmic expressions cancel catastrophically in double precision
for small thresholds.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np
from scipy import integrate, optimize
from scipy.special import digamma, entr

from .core import Method, PolicySegment, SamplingScheme

MEASURES_SQS2 = ("C", "SE")
#: smallest threshold accepted by the Sesquickselect closed form
NU_MIN = 1e-9
_DPS = 60


class DegenerateThreshold(ValueError):
    pass


class NoSignChange(ArithmeticError):
    pass


def entropy(alpha):
    """Binary entropy in nats, with 0 ln 0 = 0; accepts scalars and arrays."""
    alpha = np.asarray(alpha, dtype=float)
    if np.any((alpha < 0) | (alpha > 1)):
        raise ValueError("entropy is defined on [0, 1]")
    h = entr(alpha) + entr(1.0 - alpha)
    return float(h) if h.ndim == 0 else h


def _scheme(t) -> SamplingScheme:
    return t if isinstance(t, SamplingScheme) else SamplingScheme(tuple(t))


def h_const(scheme) -> Fraction:
    """H(t) = 1 - sum (t_l+1)(t_l+2) / ((k+1)(k+2))."""
    sc = _scheme(scheme)
    k = sc.k
    return 1 - sum(Fraction((x + 1) * (x + 2), (k + 1) * (k + 2)) for x in sc.t)


def grand_avg_leading(a, scheme):
    """Leading coefficient a/H of the grand average for a non-adaptive method."""
    if a <= 0:
        raise ValueError("toll coefficient must be positive")
    return a / h_const(scheme)


def a_se(method: Method, scheme) -> Fraction:
    """Scanned elements per element of one partitioning round."""
    sc = _scheme(scheme)
    PolicySegment(method, sc)  # arity check
    tau = sc.tau
    if method is Method.CLASSIC:
        return Fraction(1)
    if method is Method.YBB:
        return 1 + tau[0]
    if method is Method.BBY:
        return 1 + tau[2]
    if method is Method.WATERLOO:
        return 1 + tau[0] + tau[3]
    if method is Method.SIM_YBB_ATOMIC:
        return 1 + tau[0] + tau[1]
    raise ValueError(f"{method.value} has rank-dependent partitioning costs")


def a_se_best_dual(scheme) -> Fraction:
    """YBB or BBY, whichever re-scans the smaller outer segment."""
    sc = _scheme(scheme)
    if sc.s != 3:
        raise ValueError("dual-pivot scheme needs s = 3")
    return 1 + Fraction(min(sc.t[0], sc.t[2]) + 1, sc.k + 1)


def a_c(method: Method, scheme) -> Fraction:
    """Comparisons per element of one round, where a closed form is known."""
    sc = _scheme(scheme)
    PolicySegment(method, sc)
    if method is Method.CLASSIC:
        return Fraction(1)
    if method is Method.WATERLOO:
        return Fraction(2)
    if method in (Method.YBB, Method.BBY) and not any(sc.t):
        return Fraction(19, 12)
    raise ValueError(
        f"no closed-form comparison coefficient for {method.value} with t={sc}; "
        "estimate it with solver.estimate_a_empirical"
    )


def a_wa(method: Method, scheme) -> Fraction:
    """Write accesses per element of one round for the kernels in this package."""
    sc = _scheme(scheme)
    PolicySegment(method, sc)
    if method is Method.CLASSIC:
        # two writes per exchanged pair; pairs ~ n * E[D1 D2]
        t1, t2 = sc.t
        return Fraction(2 * (t1 + 1) * (t2 + 1), (sc.k + 1) * (sc.k + 2))
    if method in (Method.YBB, Method.BBY) and not any(sc.t):
        return Fraction(11, 12)
    raise ValueError(f"no write-access coefficient for {method.value} with t={sc}")


def coefficient(measure: str, method: Method, scheme) -> Fraction:
    fn = {"C": a_c, "SE": a_se, "WA": a_wa}[measure]
    return fn(method, scheme)


def f_cqs(alpha, a=1):
    return float(a) * (2.0 + 2.0 * entropy(alpha))


def f_yqs(alpha, a=1):
    return float(a) * (1.5 + entropy(alpha))


def exact_cqs_comparisons(n: int, m: int) -> float:
    """Expected comparisons of classic Quickselect without sampling."""
    if not 1 <= m <= n:
        raise ValueError(f"rank {m} outside [1..{n}]")

    def harmonic(x):
        return float(digamma(x + 1) + np.euler_gamma)

    return 2.0 * ((n + 1) * harmonic(n) - (n + 3 - m) * harmonic(n + 1 - m)
                  - (m + 2) * harmonic(m) + n + 3)


# ---------------------------------------------------------------------------
# Sesquickselect (sample of two) closed form
# ---------------------------------------------------------------------------

# coefficient lists are highest degree first
_POLY = {
    "SE": {
        "c1": [20, -120, 260, -264, 144, -40, 4],
        "q3": (48, Fraction(1, 2)),
        "c3L": [90, -308, 510, -560, 408, -176, 32],
        "c3nl": [-110, 380, -506, 344, -132, 24],
        "c3n": [45, -40, -125, 212, -136, 32],
        "q4": 48,
        "c4L": [198, -956, 1890, -2000, 1236, -440, 68],
        "c4n": ([-456, 2352, -3641, 2756, -1146, 204], Fraction(1, 3)),
        "q5": (192, Fraction(3, 8)),
        "c5n": [-450, 1540, -2034, 1368, -492, 72],
    },
    "C": {
        "c1": [20, -120, 260, -276, 162, -52, 7],
        "q3": (12, Fraction(1, 2)),
        "c3L": [6, 16, -69, 70, -24, -2, 2],
        "c3nl": [-26, 92, -125, 86, -33, 6],
        "c3n": [45, -124, 121, -52, 5, 2],
        "q4": 12,
        "c4L": [168, -956, 2031, -2180, 1317, -446, 65],
        "c4n": ([-1644, 6792, -9409, 6514, -2445, 390], Fraction(1, 6)),
        "q5": (228, Fraction(15, 38)),
        "c5n": [-534, 1828, -2415, 1626, -591, 90],
    },
}


def _mpf(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _poly(coeffs, x):
    return mpmath.polyval([_mpf(c) for c in coeffs], x)


def _check_nu(nu, measure):
    if measure not in _POLY:
        raise ValueError(f"measure must be one of {MEASURES_SQS2}, got {measure!r}")
    if not NU_MIN <= float(nu) <= 0.5:
        raise DegenerateThreshold(
            f"degenerate threshold nu={nu}: the constants are 0/0 as nu -> 0; "
            f"need {NU_MIN} <= nu <= 1/2"
        )


def _delta(x):
    L = mpmath.log(1 - x)
    return 2 * (60 * L * x**6 - 360 * L * x**5 - 140 * x**6 + 780 * L * x**4 + 480 * x**5
                - 840 * L * x**3 - 635 * x**4 + 504 * L * x**2 + 428 * x**3 - 168 * L * x
                - 156 * x**2 + 24 * L + 24 * x)


def _q(x, a):
    return (x**4 - 4 * x**3 + 4 * x**2 - 2 * x + _mpf(a)) * (1 - x) ** 2 * mpmath.log(1 - x)


def delta(nu) -> float:
    """Common denominator of the Sesquickselect constants (vanishes at 0)."""
    with mpmath.workdps(_DPS):
        return float(_delta(_mpf(nu)))


def q_poly(nu, a) -> float:
    with mpmath.workdps(_DPS):
        return float(_q(_mpf(nu), a))


def _constants_mp(x, measure):
    p = _POLY[measure]
    L = mpmath.log(1 - x)
    lnx = mpmath.log(x)
    d = _delta(x)
    k3, a3 = p["q3"]
    c1 = _poly(p["c1"], x)
    c3 = (k3 * _q(x, a3) * (lnx - L) + _poly(p["c3L"], x) * L
          + _poly(p["c3nl"], x) * x * lnx + _poly(p["c3n"], x) * x)
    cn, scale = p["c4n"]
    c4 = (-p["q4"] * _q(x, Fraction(1, 2)) * L + _poly(p["c4L"], x) * L
          - mpmath.mpf(20) / 3 * x**9 + 30 * x**8 - mpmath.mpf(170) / 3 * x**7
          + _mpf(scale) * _poly(cn, x) * x)
    k5, a5 = p["q5"]
    c5 = k5 * _q(x, a5) + _poly(p["c5n"], x) * x
    return c1 / d, mpmath.mpf(2), c3 / d, c4 / d, c5 / d, mpmath.mpf(3) / 2


@lru_cache(maxsize=256)
def sqs2_constants(nu, measure="SE"):
    """(C1, ..., C6) of the piecewise closed form for threshold ``nu``.

    C2 = 2 and C6 = 3/2 for both measures (the toll at the extremes is 1).
    """
    _check_nu(nu, measure)
    with mpmath.workdps(_DPS):
        return tuple(float(c) for c in _constants_mp(_mpf(nu), measure))


def _f1(x, c):
    c1, c2, c3, _, _, c6 = c
    x = np.asarray(x, dtype=float)  # x <= 1/2 here
    shape = x**3 / 6 + x**2 / 2 - x - (1 - x) * np.log1p(-x)
    return c1 * shape + c2 * entropy(x) + c3 * x + c6


def f_sqs2(alpha, nu, measure="SE"):
    """Leading-term cost curve of Sesquickselect with threshold ``nu``."""
    c = sqs2_constants(float(nu), measure)
    a = np.asarray(alpha, dtype=float)
    if np.any((a < 0) | (a > 1)):
        raise ValueError("alpha must lie in [0, 1]")
    x = np.minimum(a, 1.0 - a)
    outer = _f1(x, c)
    inner = c[3] + c[4] * entropy(x)
    # central interval is [nu, 1 - nu), as in the policies; at nu = 1/2 it is empty
    out = np.where((a < nu) | (a >= 1.0 - nu) | (nu >= 0.5), outer, inner)
    return float(out) if out.ndim == 0 else out


def sqs2_branch_values(nu, measure="SE"):
    """(g1, g2): the outer and central branch evaluated at the threshold itself."""
    _check_nu(nu, measure)
    with mpmath.workdps(_DPS):
        x = _mpf(nu)
        c1, c2, c3, c4, c5, c6 = _constants_mp(x, measure)
        h = -x * mpmath.log(x) - (1 - x) * mpmath.log(1 - x)
        g1 = c1 * (x**3 / 6 + x**2 / 2 - x - (1 - x) * mpmath.log(1 - x)) + c2 * h + c3 * x + c6
        g2 = c4 + c5 * h
        return float(g1), float(g2)


@lru_cache(maxsize=8)
def find_nu_star(measure="SE", tol=1e-8, eps=1e-6):
    """Threshold where the outer and central branches meet, by bisection."""

    def gap(nu):
        g1, g2 = sqs2_branch_values(nu, measure)
        return g1 - g2

    lo, hi = eps, 0.5 - eps
    glo, ghi = gap(lo), gap(hi)
    if glo * ghi > 0:
        raise NoSignChange(
            f"g1 - g2 does not change sign on [{lo}, {hi}] for measure {measure}: "
            f"gap({lo}) = {glo:.6g}, gap({hi}) = {ghi:.6g}"
        )
    return optimize.bisect(gap, lo, hi, xtol=tol)


def grand_average_of(f, breakpoints=(), tol=1e-7):
    """Integral of ``f`` over [0, 1], split at ``breakpoints``."""
    edges = sorted({0.0, 1.0, *(float(b) for b in breakpoints if 0 < b < 1)})
    total = 0.0
    for a, b in zip(edges, edges[1:]):
        val, _ = integrate.quad(lambda x: float(f(x)), a, b, epsabs=tol, epsrel=tol, limit=200)
        total += val
    return total


def sqs2_grand_average(nu, measure="SE"):
    return grand_average_of(lambda a: f_sqs2(a, nu, measure), (nu, 1 - nu))


# ---------------------------------------------------------------------------
# published reference values
# ---------------------------------------------------------------------------

#: Grand averages without sampling, per number of segments: (name, C, SE, WA).
#: Rows with s >= 5 have no algorithm in this package.
TABLE1 = {
    2: ("classic", Fraction(3), Fraction(3), Fraction(1)),
    3: ("YBB", Fraction(19, 6), Fraction(8, 3), Fraction(11, 6)),
    4: ("Waterloo", Fraction(10, 3), Fraction(5, 2), Fraction(2)),
    5: ("", Fraction(7, 2), Fraction(27, 10), Fraction(47, 20)),
    6: ("", Fraction(11, 3), Fraction(14, 5), Fraction(38, 15)),
    7: ("", Fraction(53, 14), Fraction(64, 21), Fraction(17, 6)),
    8: ("", Fraction(27, 7), Fraction(45, 14), Fraction(85, 28)),
}
TABLE1_METHODS = {2: Method.CLASSIC, 3: Method.YBB, 4: Method.WATERLOO}

#: Special values (alpha = 0, alpha = 1/2, grand average) per (variant, measure).
#: Values marked approximate are given to three decimals.
TABLE2 = {
    ("prop2", "C"): (1.5, 3.113, 2.598),
    ("prop2", "SE"): (1.5, 3.113, 2.598),
    ("yqs", "C"): (2.375, 3.472, 19 / 6),
    ("sqs2", "C"): (1.5, 3.252, 2.733),
    ("yqs", "SE"): (2.0, 2.924, 8 / 3),
    ("sqs2", "SE"): (1.5, 2.843, 2.500),
}
TABLE2_APPROX = {
    ("prop2", "C"): (False, True, True),
    ("prop2", "SE"): (False, True, True),
    ("yqs", "C"): (False, True, False),
    ("sqs2", "C"): (False, True, True),
    ("yqs", "SE"): (False, True, False),
    ("sqs2", "SE"): (False, True, True),
}


def table2_analytic(variant, measure):
    """Closed-form (f(0), f(1/2), average) matching one TABLE2 row."""
    if variant == "yqs":
        a = float(a_c(Method.YBB, (0, 0, 0)) if measure == "C" else a_se(Method.YBB, (0, 0, 0)))
        return f_yqs(0.0, a), f_yqs(0.5, a), grand_average_of(lambda x: f_yqs(x, a))
    nu = 0.5 if variant == "prop2" else find_nu_star("SE")
    # a sample of two with one pivot scans each element once per comparison
    m = "SE" if variant == "prop2" else measure
    return f_sqs2(0.0, nu, m), f_sqs2(0.5, nu, m), sqs2_grand_average(nu, m)
