"""Fixed-point solver for the fixed-quantile cost curve of an adaptive policy.

The unknown curve f is piecewise linear on the grid ``alpha_i = i / N``, with
a jump allowed at every (snapped) policy breakpoint. One application of the
operator is

    (T f)(alpha) = a(alpha) + sum over segments l of E[D_l f(alpha_l') ; alpha in segment l]

where D ~ Dirichlet(t + 1) are the segment fractions of a round and alpha_l'
the relative rank inside segment l. Each term is rewritten as an integral
against f over its argument x, so that T is linear in the grid values:
``T f = a + M f``. The kernel integrals are done per grid cell with
Gauss-Legendre against the two hat functions of the cell; the inner
integral of a middle segment is polynomial and integrated exactly.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .core import AdaptivePolicy, Method, PolicySegment, SamplingScheme, rng_from
from .analytic import coefficient
from .partition import first_rounds

_GL_CELL = np.polynomial.legendre.leggauss(6)


class SolverError(ArithmeticError):
    pass


class NotConverged(SolverError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class TStops:
    """Sample elements left (``left``) and right (``right``) of each segment's pivots."""

    left: tuple[int, ...]
    right: tuple[int, ...]

    @classmethod
    def of(cls, scheme: SamplingScheme) -> "TStops":
        t = scheme.t
        left = tuple(sum(x + 1 for x in t[:ell]) - 1 for ell in range(len(t)))
        right = tuple(sum(x + 1 for x in t[ell + 1:]) - 1 for ell in range(len(t)))
        return cls(left, right)


def snap_breakpoints(breakpoints, N: int) -> tuple[int, ...]:
    """Grid indices of the breakpoints, rounded half away from 1/2 so mirror images stay mirrored."""
    idx = []
    for b in breakpoints:
        if b <= 0.5:
            idx.append(int(math.floor(b * N + 0.5)))
        else:
            idx.append(N - int(math.floor((1 - b) * N + 0.5)))
    if any(i >= j for i, j in zip(idx, idx[1:])):
        raise ValueError(f"grid N={N} too coarse: breakpoints {breakpoints} collide after snapping")
    return tuple(idx)


class _Layout:
    """Numbering of the unknowns: one value per (piece, node), pieces share no unknown."""

    def __init__(self, policy: AdaptivePolicy, N: int):
        self.N = N
        self.nodes = snap_breakpoints(policy.breakpoints, N)
        starts, piece_of_unknown, node_of_unknown = [], [], []
        for p, (i0, i1) in enumerate(zip(self.nodes, self.nodes[1:])):
            starts.append(len(node_of_unknown))
            for i in range(i0, i1 + 1):
                piece_of_unknown.append(p)
                node_of_unknown.append(i)
        self.starts = starts
        self.piece = np.array(piece_of_unknown)
        self.node = np.array(node_of_unknown)
        self.size = len(node_of_unknown)
        # the two unknowns spanning each cell
        cell_piece = np.searchsorted(np.array(self.nodes[1:-1]), np.arange(N), side="right")
        self.cell_left = np.array([starts[p] + j - self.nodes[p] for j, p in enumerate(cell_piece)])
        self.cell_right = self.cell_left + 1

    def value_index(self, i: int) -> int:
        """Unknown holding f(i/N) under the right-interval convention."""
        p = min(np.searchsorted(self.nodes, i, side="right") - 1, len(self.nodes) - 2)
        return self.starts[p] + i - self.nodes[p]


@dataclass
class GridFunction:
    """Piecewise-linear curve on ``alpha_i = i / N`` with jumps at breakpoint nodes.

    ``values[i]`` is f(alpha_i) (the right-hand value at a breakpoint);
    ``left_limits`` maps breakpoint node index to the left-hand limit.
    """

    N: int
    values: np.ndarray
    left_limits: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.N + 1,):
            raise ValueError(f"need {self.N + 1} values for N={self.N}")
        if not np.all(np.isfinite(self.values)):
            raise SolverError("grid function has non-finite values")

    @property
    def alpha(self) -> np.ndarray:
        return np.arange(self.N + 1) / self.N

    def _left(self, i):
        return self.left_limits.get(i, self.values[i])

    def _right_ends(self):
        right = self.values.copy()
        for i, v in self.left_limits.items():
            right[i] = v
        return right

    def __call__(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        x = np.clip(alpha, 0.0, 1.0) * self.N
        j = np.minimum(np.floor(x).astype(int), self.N - 1)
        theta = x - j
        right = self._right_ends()
        out = (1 - theta) * self.values[j] + theta * right[j + 1]
        out = np.where(x == self.N, self.values[-1], out)
        return float(out) if out.ndim == 0 else out

    def integral(self) -> float:
        """Exact integral of the piecewise-linear curve."""
        right = self._right_ends()[1:]
        return float(np.sum(self.values[:-1] + right) / (2 * self.N))

    def sup_distance(self, other) -> float:
        """Sup-norm distance at the nodes (both one-sided values at jumps)."""
        if isinstance(other, GridFunction):
            d = np.max(np.abs(self.values - other.values))
            for i, v in self.left_limits.items():
                d = max(d, abs(v - other._left(i)))
            return float(d)
        ref = np.asarray(other(self.alpha), dtype=float)
        return float(np.max(np.abs(self.values - ref)))

    def max_asymmetry(self) -> float:
        """max |f(alpha) - f(1 - alpha)|; the mirror of a right value is a left limit."""
        return float(np.max(np.abs(self.values - self._right_ends()[::-1])))


def _gl_cells(cells, N):
    g, w = _GL_CELL
    x = ((cells[:, None] + (g[None, :] + 1) / 2) / N).ravel()
    wt = np.broadcast_to(w[None, :] / (2 * N), (len(cells), len(g))).ravel()
    theta = ((g + 1) / 2)[None, :].repeat(len(cells), 0).ravel()
    cell = cells.repeat(len(g))
    return x, wt, theta, cell


def _log_beta(*params):
    return sum(gammaln(p) for p in params) - gammaln(sum(params))


def _row_terms(alpha, scheme: SamplingScheme, N):
    """Quadrature nodes of the operator row at ``alpha``: (x, weight, theta, cell) chunks.

    The two endpoint rows are returned as a single point mass at x = alpha.
    """
    t = scheme.t
    s = scheme.s
    ts = TStops.of(scheme)
    tau = scheme.tau
    if alpha == 0.0:
        return [("point", 0, float(tau[0]))]
    if alpha == 1.0:
        return [("point", N, float(tau[-1]))]
    i = int(round(alpha * N))
    out = []
    # leftmost segment: argument x = alpha / u over x in [alpha, 1]
    x, w, th, cell = _gl_cells(np.arange(i, N), N)
    lb = _log_beta(t[0] + 1, ts.right[0] + 1)
    u = alpha / x
    k1 = np.exp((t[0] + 1) * np.log(u) + ts.right[0] * np.log1p(-u) - lb) * alpha / x**2
    out.append((x, w * k1, th, cell))
    # rightmost segment: argument x = (alpha - v) / (1 - v) over x in [0, alpha]
    x, w, th, cell = _gl_cells(np.arange(0, i), N)
    lb = _log_beta(ts.left[-1] + 1, t[-1] + 1)
    v = (alpha - x) / (1 - x)
    ks = np.exp(ts.left[-1] * np.log(v) + (t[-1] + 1) * np.log1p(-v) - lb) * (1 - alpha) / (1 - x) ** 2
    out.append((x, w * ks, th, cell))
    # middle segments: inner integral over the left boundary u is polynomial
    if s > 2:
        x, w, th, cell = _gl_cells(np.arange(0, N), N)
        gu, wu = np.polynomial.legendre.leggauss(max(8, scheme.k // 2 + 2))
        u_lo = np.maximum(0.0, (alpha - x) / (1 - x))
        span = alpha - u_lo
        u = u_lo[:, None] + span[:, None] * (gu[None, :] + 1) / 2
        xs = x[:, None]
        d = (alpha - u) / xs  # segment fraction v - u
        rest = np.clip(1 - u - d, 0.0, None)
        for ell in range(1, s - 1):
            lb = _log_beta(ts.left[ell] + 1, t[ell] + 1, ts.right[ell] + 1)
            integrand = u ** ts.left[ell] * d ** (t[ell] + 1) * rest ** ts.right[ell] * d / xs
            inner = (integrand * wu[None, :]).sum(1) * span / 2
            out.append((x, w * inner * math.exp(-lb), th, cell))
    return out


def _build_matrix(policy: AdaptivePolicy, N: int):
    lay = _Layout(policy, N)
    M = np.zeros((lay.size, lay.size))
    for r in range(lay.size):
        seg = policy.segments[lay.piece[r]]
        alpha = lay.node[r] / N
        for term in _row_terms(alpha, seg.scheme, N):
            if isinstance(term[0], str):
                _, node, mass = term
                M[r, r if node == lay.node[r] else lay.value_index(node)] += mass
                continue
            _, w, th, cell = term
            if not np.all(np.isfinite(w)):
                bad = np.flatnonzero(~np.isfinite(w))[0]
                raise SolverError(f"non-finite kernel at alpha={alpha}, x={term[0][bad]}")
            M[r] += np.bincount(lay.cell_left[cell], w * (1 - th), minlength=lay.size)
            M[r] += np.bincount(lay.cell_right[cell], w * th, minlength=lay.size)
    return lay, M


@lru_cache(maxsize=16)
def operator_matrix(policy: AdaptivePolicy, N: int):
    if N < 2:
        raise ValueError("grid needs N >= 2")
    return _build_matrix(policy, N)


def _tolls(policy: AdaptivePolicy, coeffs, lay: _Layout) -> np.ndarray:
    coeffs = [float(c) for c in coeffs]
    if len(coeffs) != policy.d:
        raise ValueError(f"need one toll coefficient per policy interval ({policy.d}), got {len(coeffs)}")
    if any(not (c > 0 and math.isfinite(c)) for c in coeffs):
        raise ValueError("toll coefficients must be positive and finite")
    return np.array(coeffs)[lay.piece]


def _to_grid(lay: _Layout, vec) -> GridFunction:
    N = lay.N
    values = np.empty(N + 1)
    left = {}
    for r in range(lay.size):
        i = lay.node[r]
        if r == lay.value_index(i):
            values[i] = vec[r]
        else:
            left[int(i)] = float(vec[r])
    return GridFunction(N, values, left)


def _from_grid(lay: _Layout, f: GridFunction) -> np.ndarray:
    if f.N != lay.N:
        raise ValueError(f"grid mismatch: function has N={f.N}, operator N={lay.N}")
    vec = np.empty(lay.size)
    for r in range(lay.size):
        i = lay.node[r]
        vec[r] = f.values[i] if r == lay.value_index(i) else f._left(i)
    return vec


def grid_of(fn, policy: AdaptivePolicy, N: int) -> GridFunction:
    """Sample a callable on the grid of ``policy`` (left limits taken just below breakpoints)."""
    lay = operator_matrix(policy, N)[0]
    vec = np.empty(lay.size)
    for r in range(lay.size):
        i = lay.node[r]
        a = i / N
        vec[r] = fn(a) if r == lay.value_index(i) else fn(a - 1e-12)
    return _to_grid(lay, vec)


def apply_operator(f: GridFunction, policy: AdaptivePolicy, coeffs) -> GridFunction:
    """One application of the integral operator to ``f``."""
    lay, M = operator_matrix(policy, f.N)
    return _to_grid(lay, _tolls(policy, coeffs, lay) + M @ _from_grid(lay, f))


@dataclass
class Solution:
    f: GridFunction
    residual: float
    iterations: int
    history: list


def solve_fixed_point(policy: AdaptivePolicy, coeffs, N: int = 512, tol: float = 1e-7,
                      max_iter: int = 1000) -> Solution:
    """Iterate ``f <- T f`` from ``f = a`` until the sup-norm update is below ``tol``."""
    if N < 100:
        raise ValueError(f"grid resolution N={N} below the minimum of 100")
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    lay, M = operator_matrix(policy, N)
    a = _tolls(policy, coeffs, lay)
    f = a.copy()
    history = []
    for it in range(1, max_iter + 1):
        g = a + M @ f
        change = float(np.max(np.abs(g - f)))
        history.append(change)
        f = g
        if not math.isfinite(change):
            raise NotConverged(f"iteration diverged at step {it}", history)
        if change < tol:
            residual = float(np.max(np.abs(a + M @ f - f)))
            return Solution(_to_grid(lay, f), residual, it, history)
    raise NotConverged(
        f"no convergence within {max_iter} iterations; last update {history[-1]:.3g}", history
    )


# ---------------------------------------------------------------------------
# toll coefficients
# ---------------------------------------------------------------------------

def estimate_a_empirical(method: Method, scheme, measure: str, n: int = 10**6, trials: int = 1000,
                         rng=0):
    """Mean first-round cost over n, with its standard error: (mean, stderr)."""
    scheme = scheme if isinstance(scheme, SamplingScheme) else SamplingScheme(tuple(scheme))
    col = ("C", "SE", "WA").index(measure)
    costs, _ = first_rounds(method, scheme, n, trials, rng_from(rng))
    x = costs[:, col] / n
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan


def policy_coefficients(policy: AdaptivePolicy, measure: str, fallback=None):
    """Closed-form toll per interval; intervals without one use ``fallback(method, scheme)``."""
    out = []
    for seg in policy.segments:
        try:
            out.append(float(coefficient(measure, seg.method, seg.scheme)))
        except ValueError:
            if fallback is None:
                raise
            out.append(float(fallback(seg.method, seg.scheme)))
    return out


def load_policy_config(path, measure: str = "SE", n: int = 10**6, trials: int = 1000, seed: int = 0):
    """Read ``{breakpoints, segments: [{method, t, a: {C, SE}}]}``; returns (policy, coeffs)."""
    doc = json.loads(Path(path).read_text())
    return policy_from_config(doc, measure, n, trials, seed)


def policy_from_config(doc, measure="SE", n=10**6, trials=1000, seed=0):
    try:
        bps = [float(b) for b in doc["breakpoints"]]
        segs = doc["segments"]
        parsed = [PolicySegment(Method(s["method"]), SamplingScheme(tuple(s["t"]))) for s in segs]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed policy config: missing or bad field {exc}") from None
    policy = AdaptivePolicy(tuple(bps), tuple(parsed))
    coeffs = []
    for raw, seg in zip(segs, parsed):
        given = (raw.get("a") or {}).get(measure)
        if given is not None:
            coeffs.append(float(given))
            continue
        try:
            coeffs.append(float(coefficient(measure, seg.method, seg.scheme)))
        except ValueError:
            coeffs.append(estimate_a_empirical(seg.method, seg.scheme, measure, n, trials, seed)[0])
    return policy, coeffs


def curve_export(f: GridFunction, path) -> None:
    """Write ``alpha,value`` rows, one per grid node."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "value"])
        for a, v in zip(f.alpha, f.values):
            w.writerow([repr(float(a)), repr(float(v))])
