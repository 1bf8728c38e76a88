"""Command-line entry point.

Exit status: 0 on success, 1 on invalid input, 2 on a numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from . import fem
from .mesh import MeshBudgetError, dump_mesh, generate_mesh
from .reduced import (BracketError, DomainError, ModeParams, blowup_exponent, mode_exponent,
                      solve_h, subsolution, subsolution_constant)
from .solvers import FactorizationError, NonConvergenceError
from .lab import analysis, report
from .lab.config import ConfigError, parse_config
from .lab.sweep import SweepError, run_cell, run_sweep

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
_NUMERICAL = (NonConvergenceError, FactorizationError, MeshBudgetError, BracketError,
              SweepError, fem.AssemblyError, np.linalg.LinAlgError, RuntimeError)


def _load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def cmd_solve(args):
    cfg = _load_config(args.config)
    eps = args.eps if args.eps is not None else cfg.physics.eps[0]
    gamma = args.gamma if args.gamma is not None else cfg.physics.gamma[0]
    rec = run_cell(cfg, eps, gamma)
    print("[summary]")
    for k in report.CSV_COLUMNS:
        v = getattr(rec, k)
        print(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}")
    for k, v in rec.extras["checks"].items():
        print(f"check.{k}={v}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _load_config(args.config)
    res = run_sweep(cfg, workers=args.workers)
    fits = analysis.analyze(res, cfg.mu, cfg.analysis.exclude_largest)
    out = args.out or cfg.output
    report.emit_report(res, fits, out, res.failures)
    _print_table(res)
    for f in res.failures:
        print(f"FAILED eps={f.eps:g} gamma={f.gamma:g}: {f.error}", file=sys.stderr)
    for name, ok in fits["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    print(f"wrote {out}")
    return EXIT_OK


def _print_table(records):
    print(f"{'gamma':>8} {'eps':>10} {'alpha':>8} {'grad_max_neck':>14} {'U1':>10} {'U2':>10} {'dofs':>8}")
    for r in records:
        print(f"{r.gamma:8.4g} {r.eps:10.3g} {r.alpha:8.4f} {r.grad_max_neck:14.6g} "
              f"{r.U1:10.4g} {r.U2:10.4g} {r.dofs:8d}")


def cmd_ode(args):
    p = ModeParams(n=args.n, gamma=args.gamma, mu=args.mu, eps=args.eps)
    h = solve_h(p)
    c = subsolution_constant(p.n, p.gamma_hat)
    lower = subsolution(h.grid, p, c)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["r", "h", "sub", "super", "lower_bound"])
    for r, v, lb in zip(h.grid, h.values, lower):
        w.writerow([f"{r:.17g}", f"{v:.17g}", f"{r:.17g}", f"{r ** p.alpha:.17g}", f"{lb:.17g}"])
    return EXIT_OK


def cmd_alpha(args):
    kmax = args.kmax
    head = ["n", "gamma", "mu", "alpha"] + [f"alpha_{k}" for k in range(1, kmax + 1)]
    print(" ".join(f"{h:>12}" for h in head))
    for n in args.n:
        for g in args.gamma:
            for mu in args.mu:
                row = [f"{n:>12d}", f"{g:>12.6g}", f"{mu:>12.6g}", f"{blowup_exponent(n, g, mu):>12.8g}"]
                for k in range(1, kmax + 1):
                    if n == 2 and k > 1:
                        row.append(f"{'-':>12}")
                    else:
                        row.append(f"{mode_exponent(n, mu * g, k):>12.8g}")
                print(" ".join(row))
    return EXIT_OK


def cmd_mesh_dump(args):
    cfg = _load_config(args.config)
    eps = args.eps if args.eps is not None else cfg.physics.eps[0]
    mesh = generate_mesh(cfg.geometry_for(eps), cfg.mesh_params())
    text = dump_mesh(mesh)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args):
    with open(args.records, encoding="utf-8") as fh:
        records = report.records_from_csv(fh.read())
    if not records:
        raise ValueError(f"{args.records} holds no records")
    mu = 1.0 / args.radius
    fits = analysis.analyze(records, mu)
    out = args.out or os.path.dirname(os.path.abspath(args.records))
    report.emit_report(records, fits, out)
    for name, ok in fits["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robinneck", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one (eps, gamma) cell and print its summary")
    p.add_argument("config")
    p.add_argument("--eps", type=float)
    p.add_argument("--gamma", type=float)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="run every cell and write the report files")
    p.add_argument("config")
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ode", help="radial profile h as CSV")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--mu", type=float, default=1.0)
    p.set_defaults(func=cmd_ode)

    p = sub.add_parser("alpha", help="table of blow-up and mode exponents")
    p.add_argument("--n", type=int, nargs="+", default=[2, 3])
    p.add_argument("--gamma", type=float, nargs="+", required=True)
    p.add_argument("--mu", type=float, nargs="+", default=[1.0])
    p.add_argument("--kmax", type=int, default=3)
    p.set_defaults(func=cmd_alpha)

    p = sub.add_parser("mesh", help="mesh utilities")
    msub = p.add_subparsers(dest="mesh_command", required=True)
    d = msub.add_parser("dump", help="write the mesh of one gap in text form")
    d.add_argument("config")
    d.add_argument("--eps", type=float)
    d.add_argument("-o", "--output")
    d.set_defaults(func=cmd_mesh_dump)

    p = sub.add_parser("report", help="recompute fits and plots from a sweep.csv")
    p.add_argument("records")
    p.add_argument("--out")
    p.add_argument("--radius", type=float, default=1.0, help="inclusion radius R (mu = 1/R)")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream closed early (e.g. piped into head)
        sys.stdout = open(os.devnull, "w")
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except _NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DomainError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
