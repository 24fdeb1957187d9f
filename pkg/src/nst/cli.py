"""Command-line entry point: ``nst-bench <command> [options]``.

Commands
--------
phase, noise, trace, adaptive, timing
    Run an experiment from ``--config spec.json`` (or the built-in desk-scale
    default) and write CSV files under ``--out``.
analyze
    RIP / preconditioned RIP constants and convergence certificate of a
    matrix file, printed as JSON.
solve
    Run one algorithm on a matrix and right-hand side read from files.

Exit codes: 0 success, 1 usage error, 2 analysis infeasible, 3 I/O failure.
"""
import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, bench
from .errors import CombinatorialBlowup, NSTError
from .linalg import build_operator, load_matrix

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _global_flags(p):
    p.add_argument("--config", help="ExperimentSpec JSON file")
    p.add_argument("--out", help="output directory (experiments) or file")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--trials", type=int, help="trials per grid point")
    p.add_argument("--threads", type=int, default=None, help="concurrent trial workers")


def build_parser():
    parser = _Parser(prog="nst-bench", description="Null space tuning solvers and experiments")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for kind, help_text in [
        ("phase", "success frequency versus sparsity"),
        ("noise", "relative error versus noise level"),
        ("trace", "per-iteration relative error"),
        ("adaptive", "adaptive initial sparsity (kappa) sweep"),
        ("timing", "solve time versus sparsity"),
    ]:
        p = sub.add_parser(kind, help=help_text)
        _global_flags(p)
    p = sub.add_parser("analyze", help="RIP constants and certificate of a matrix")
    _global_flags(p)
    p.add_argument("--matrix", required=True)
    p.add_argument("-s", "--sparsity", type=int, required=True)
    p.add_argument("--mode", choices=("exhaustive", "sample"), default="exhaustive")
    p.add_argument("--samples", type=int, default=10000)
    p = sub.add_parser("solve", help="recover a sparse vector from files")
    _global_flags(p)
    p.add_argument("--matrix", required=True)
    p.add_argument("--rhs", required=True, help="text file with the measurement vector")
    p.add_argument("--algorithm", default="nst_ht_fb", choices=bench.ALGORITHMS)
    p.add_argument("-s", "--sparsity", type=int, required=True)
    p.add_argument("--kappa", type=float, default=None)
    return parser


def _experiment(args):
    if args.config:
        try:
            spec = bench.ExperimentSpec.from_json(Path(args.config).read_text())
        except OSError as err:
            raise IOError(f"cannot read config: {err}") from err
        except (ValueError, TypeError, KeyError) as err:
            raise UsageError(f"invalid config: {err}") from err
        if spec.kind != args.command:
            raise UsageError(f"config kind {spec.kind!r} does not match command {args.command!r}")
    else:
        spec = bench.default_spec(args.command)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out is not None:
        overrides["output_path"] = args.out
    try:
        spec = replace(spec, **overrides)
    except ValueError as err:
        raise UsageError(str(err)) from err
    result = bench.run_experiment(spec)
    for row in result.aggregate:
        print(
            f"{row['algorithm']:>22s} s={row['s']:<4d} "
            + (f"eps={row['eps']:<6g} " if row["eps"] is not None else "")
            + (f"kappa={row['kappa']:<4g} " if row["kappa"] is not None else "")
            + f"freq={row['success_freq']:.3f} err={row['mean_rel_error']:.3e} "
            + f"iters={row['mean_iters']:.1f}"
        )
    return EXIT_OK


def _load(path):
    try:
        return load_matrix(path)
    except OSError as err:
        raise IOError(f"cannot read {path}: {err}") from err


def _analyze(args):
    a = _load(args.matrix)
    samples = None if args.mode == "exhaustive" else args.samples
    seed = args.seed or 0
    op = build_operator(a)
    report = analysis.rip_report(op, args.sparsity, samples=samples, seed=seed)
    cert = None
    if 3 * args.sparsity <= op.N:
        cert = analysis.certificate(op, args.sparsity, samples=samples, seed=seed)
    text = analysis.report_json(report, cert)
    if args.out:
        try:
            Path(args.out).write_text(text + "\n")
        except OSError as err:
            raise IOError(str(err)) from err
    print(text)
    return EXIT_OK


def _solve(args):
    a = _load(args.matrix)
    try:
        b = np.loadtxt(args.rhs, ndmin=1)
    except OSError as err:
        raise IOError(f"cannot read {args.rhs}: {err}") from err
    op = build_operator(a)
    res = bench.run_algorithm(args.algorithm, op, b, args.sparsity, kappa=args.kappa)
    if args.out:
        try:
            np.savetxt(args.out, res.u, fmt="%.17g")
        except OSError as err:
            raise IOError(str(err)) from err
    print(json.dumps({
        "algorithm": args.algorithm,
        "iterations": res.iterations,
        "termination": str(res.termination),
        "residual_rel": float(np.linalg.norm(op.a @ res.u - b) / max(np.linalg.norm(b), 1e-300)),
        "support": np.flatnonzero(res.u).tolist(),
    }))
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        if args.command == "analyze":
            return _analyze(args)
        if args.command == "solve":
            return _solve(args)
        return _experiment(args)
    except UsageError as err:
        print(f"nst-bench: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except CombinatorialBlowup as err:
        print(f"nst-bench: analysis infeasible: {err}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (IOError, OSError) as err:
        print(f"nst-bench: I/O failure: {err}", file=sys.stderr)
        return EXIT_IO
    except (NSTError, ValueError) as err:
        print(f"nst-bench: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
