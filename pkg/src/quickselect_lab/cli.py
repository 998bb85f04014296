"""Command-line front end: ``qslab <subcommand> [flags]``.

Every run prints ``# config: {...}`` with its fully resolved configuration
first. Tabular output is CSV. Exit status: 0 success, 1 numerical failure,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import analytic, bench, solver
from .core import (
    MEASURES,
    PRNG_NAME,
    PRNG_STREAM_VERSION,
    Fixed,
    FixedQuantile,
    RandomRank,
    make_input,
    rng_from,
)
from .engine import parse_preset, quickselect


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_rank(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--rank", type=int, help="1-based rank m")
    g.add_argument("--alpha", type=float, help="relative rank in (0, 1); m = ceil(alpha n)")
    g.add_argument("--random-rank", action="store_true", help="uniform random rank (default)")


def _add_common(p, trials=True):
    p.add_argument("--preset", default="cqs")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    if trials:
        p.add_argument("--trials", type=int, default=1000)
        p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", help="write CSV here instead of stdout")


def build_parser():
    parser = _Parser(prog="qslab", description="Adaptive multiway Quickselect lab.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("select", help="run one selection and print the key and its costs")
    _add_common(p, trials=False)
    _add_rank(p)

    p = sub.add_parser("bench", help="Monte-Carlo cost measurement for one rank spec")
    _add_common(p)
    _add_rank(p)

    p = sub.add_parser("sweep", help="measured cost curve over a grid of relative ranks")
    _add_common(p)
    p.add_argument("--grid", type=int, default=21, help="number of alpha points")

    p = sub.add_parser("solve", help="numerical fixed-quantile cost curve of a policy")
    p.add_argument("--preset", default="cqs")
    p.add_argument("--policy", help="JSON policy config (overrides --preset)")
    p.add_argument("--measure", choices=MEASURES, default="SE")
    p.add_argument("--grid", type=int, default=512, help="grid resolution N")
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0, help="seed for empirical toll estimates")
    p.add_argument("--verify", action="store_true", help="compare with the closed form where one exists")
    p.add_argument("--out", help="write alpha,value CSV here")

    p = sub.add_parser("analytic", help="closed-form curve of a preset")
    p.add_argument("--preset", default="cqs")
    p.add_argument("--measure", choices=("C", "SE"), default="SE")
    p.add_argument("--grid", type=int, default=100, help="number of alpha intervals")
    p.add_argument("--out")

    p = sub.add_parser("table", help="reproduce a published table")
    p.add_argument("--which", choices=("table1", "table2"), default="table1")
    p.add_argument("--n", type=int, default=100_000)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("nu-star", help="optimal Sesquickselect threshold")
    p.add_argument("--measure", choices=("C", "SE"), default="SE")
    p.add_argument("--tol", type=float, default=1e-8)
    return parser


def _rank_spec(args):
    if args.rank is not None:
        return Fixed(args.rank)
    if args.alpha is not None:
        return FixedQuantile(args.alpha)
    return RandomRank()


def _echo(args, out):
    cfg = {k: v for k, v in vars(args).items()}
    cfg["prng"] = f"{PRNG_NAME}/v{PRNG_STREAM_VERSION}"
    print("# config: " + json.dumps(cfg, sort_keys=True), file=out)


def _emit_csv(rows, path, out):
    if path:
        bench.write_csv(rows, path)
    else:
        bench.write_csv(rows, out)


def _curve_rows(alpha, values):
    return "alpha,value\n" + "".join(f"{float(a)!r},{float(v)!r}\n" for a, v in zip(alpha, values))


def _closed_form(preset_name, measure, grid=None):
    """Closed-form curve for presets that have one, else None.

    With ``grid`` the threshold is moved to its snapped grid node, so the
    curve is the exact solution of the policy the solver actually sees.
    """
    p = parse_preset(preset_name)
    base = p.name.partition(":")[0]
    if p.name in ("cqs", "yqs"):
        seg = p.policy.segments[0]
        a = float(analytic.coefficient(measure, seg.method, seg.scheme))
        curve = analytic.f_cqs if p.name == "cqs" else analytic.f_yqs
        return lambda x: curve(x, a)
    if base in ("sqs2", "prop2") and measure in ("C", "SE"):
        nu = p.policy.breakpoints[1] if p.policy.d == 3 else 0.5
        if base == "prop2" and p.policy.breakpoints[1] != 0.5:
            return None
        m = "SE" if nu == 0.5 else measure
        if grid is not None:
            nu = solver.snap_breakpoints((nu,), grid)[0] / grid
        return lambda x: analytic.f_sqs2(x, nu, m)
    return None


def cmd_select(args, out):
    spec = _rank_spec(args)
    rng = rng_from(args.seed)
    a = make_input(args.n, rng)
    res = quickselect(a, spec, parse_preset(args.preset), rng, inplace=True)
    c, s, w = res.tally.as_tuple()
    print(f"key={res.key} comparisons={c} scanned_elements={s} write_accesses={w} depth={res.depth}",
          file=out)


def cmd_bench(args, out):
    st = bench.run_trials(args.preset, args.n, _rank_spec(args), args.trials, args.seed, args.threads)
    _emit_csv([st], args.out, out)


def cmd_sweep(args, out):
    rows = bench.sweep_alpha(args.preset, args.n, args.grid, args.trials, args.seed, args.threads)
    _emit_csv(rows, args.out, out)


def cmd_solve(args, out):
    if args.policy:
        policy, coeffs = solver.load_policy_config(args.policy, args.measure, seed=args.seed)
    else:
        policy = parse_preset(args.preset).policy
        coeffs = solver.policy_coefficients(
            policy, args.measure,
            lambda m, sc: solver.estimate_a_empirical(m, sc, args.measure, rng=args.seed)[0],
        )
    sol = solver.solve_fixed_point(policy, coeffs, args.grid, args.tol, args.max_iter)
    print(f"# iterations={sol.iterations} residual={sol.residual:.3g} integral={sol.f.integral():.6f}",
          file=out)
    status = 0
    if args.verify:
        exact = None if args.policy else _closed_form(args.preset, args.measure, args.grid)
        if exact is None:
            print("# verify: no closed form for this policy", file=out)
        else:
            dist = sol.f.sup_distance(exact)
            limit = 5.0 / args.grid
            ok = dist <= limit
            print(f"# verify: sup|solve - closed form| = {dist:.3g} (limit {limit:.3g}) "
                  f"{'ok' if ok else 'FAILED'}", file=out)
            status = 0 if ok else 1
    if args.out:
        solver.curve_export(sol.f, args.out)
    else:
        out.write(_curve_rows(sol.f.alpha, sol.f.values))
    return status


def cmd_analytic(args, out):
    fn = _closed_form(args.preset, args.measure)
    if fn is None:
        raise UsageError(f"no closed form for preset {args.preset!r} and measure {args.measure}")
    alpha = np.linspace(0.0, 1.0, args.grid + 1)
    values = np.array([fn(a) for a in alpha])
    text = _curve_rows(alpha, values)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        out.write(text)


def cmd_table(args, out):
    rows = bench.table_report(args.which, args.n, args.trials, args.seed, args.threads)
    print(bench.format_report(rows), file=out)


def cmd_nu_star(args, out):
    nu = analytic.find_nu_star(args.measure, args.tol)
    g1, g2 = analytic.sqs2_branch_values(nu, args.measure)
    print(f"nu_star={nu:.8f} g1={g1:.6f} g2={g2:.6f}", file=out)


COMMANDS = {
    "select": cmd_select,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
    "solve": cmd_solve,
    "analytic": cmd_analytic,
    "table": cmd_table,
    "nu-star": cmd_nu_star,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    try:
        args = build_parser().parse_args(argv)
        for name in ("n", "trials", "grid", "threads"):
            if getattr(args, name, 1) is not None and getattr(args, name, 1) < 1:
                raise UsageError(f"--{name} must be positive")
        _echo(args, out)
        return COMMANDS[args.command](args, out) or 0
    except UsageError as exc:
        print(f"qslab: error: {exc}", file=sys.stderr)
        return 2
    except (solver.SolverError, analytic.NoSignChange, ArithmeticError) as exc:
        print(f"qslab: numerical failure: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"qslab: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"qslab: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
