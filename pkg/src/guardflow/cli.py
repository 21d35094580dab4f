"""Command-line driver.

Exit status: 2 for usage errors, 1 for analysis errors or a failed
``diff``, 0 otherwise.
"""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional, TextIO

from .config import AnalysisConfig
from .intra import AnalysisError
from .ir import IRError, parse
from .oracle import OracleRefusal, enumerate_runs
from .pipeline import Analysis, analyze_program
from .query import FULL, MODES, QueryEngine, QueryError, find_node


def _positive(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"{text!r} must be at least 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--unroll", type=_positive, default=2, metavar="K", help="loop unrolling bound")
    common.add_argument("--recursion-depth", type=_positive, default=2, metavar="D", help="recursion versioning bound")
    common.add_argument("--solver", choices=MODES, default=FULL, help="solver used at query time")
    common.add_argument("--path-insensitive", action="store_true", help="replace every guard by true")
    common.add_argument("--jobs", type=_positive, default=1, metavar="N", help="threads for graph construction")
    common.add_argument("--stats", action="store_true", help="print counters on stderr")

    p = argparse.ArgumentParser(prog="guardflow", description="Guarded value-flow analysis for a small SSA language.")
    sub = p.add_subparsers(dest="command", required=True)
    b = sub.add_parser("build", parents=[common], help="print the value-flow graph")
    b.add_argument("--format", choices=("dot", "json"), default="dot")
    b.add_argument("file")
    s = sub.add_parser("slice", parents=[common], help="thin slice of a value")
    s.add_argument("--seed", required=True, metavar="V@L", help="value and label, optionally prefixed by 'func:'")
    s.add_argument("file")
    c = sub.add_parser("check", parents=[common], help="report possible double frees")
    c.add_argument("files", nargs="+")
    o = sub.add_parser("oracle", parents=[common], help="dump brute-force ground truth as JSON")
    o.add_argument("file")
    d = sub.add_parser("diff", parents=[common], help="compare the analysis with the oracle")
    d.add_argument("files", nargs="+")
    return p


def _config(args) -> AnalysisConfig:
    return AnalysisConfig(
        unroll=args.unroll,
        recursion_depth=args.recursion_depth,
        path_insensitive=args.path_insensitive,
        jobs=args.jobs,
    )


def _load(path: str):
    with open(path, encoding="utf-8") as fh:
        return parse(fh.read())


def _analyze(path: str, args) -> Analysis:
    return analyze_program(_load(path), _config(args))


def _print_stats(a: Analysis, err: TextIO, extra: Optional[dict] = None) -> None:
    stats = a.stats()
    if extra:
        stats.update(extra)
    err.write(" ".join(f"{k}={v}" for k, v in stats.items()) + "\n")
    for w in a.warnings:
        err.write(f"warning: {w}\n")


def cmd_build(args, out: TextIO, err: TextIO) -> int:
    a = _analyze(args.file, args)
    out.write(a.graph.export(args.format))
    _print_stats(a, err)
    return 0


def cmd_slice(args, out: TextIO, err: TextIO) -> int:
    a = _analyze(args.file, args)
    q = QueryEngine(a, args.solver)
    res = q.thin_slice(find_node(a, args.seed))
    out.write(res.format() + "\n")
    if args.stats:
        _print_stats(a, err, {"paths": res.visited_paths})
    return 0


def cmd_check(args, out: TextIO, err: TextIO) -> int:
    for path in args.files:
        a = _analyze(path, args)
        q = QueryEngine(a, args.solver)
        reports = q.check_double_free()
        for r in reports:
            out.write(r.format(path) + "\n")
        if args.stats:
            _print_stats(a, err, {"reports": len(reports), "solver_overflows": q.overflows})
    return 0


def cmd_oracle(args, out: TextIO, err: TextIO) -> int:
    res = enumerate_runs(_load(args.file), unroll_k=args.unroll, recursion_depth=args.recursion_depth)
    out.write(res.to_json())
    return 0


def compare(path: str, args) -> List[str]:
    """Problems found when holding the analysis against the oracle."""
    prog = _load(path)
    cfg = _config(args)
    a = analyze_program(prog, cfg)
    truth = enumerate_runs(prog, unroll_k=cfg.unroll, recursion_depth=cfg.recursion_depth)
    problems = []
    exact = not truth.violations and not a.has_havoc() and not cfg.path_insensitive
    want_pairs = truth.pairs()
    for mode in MODES:
        q = QueryEngine(a, mode)
        pairs = q.dependence_pairs()
        frees = {(r.first_free, r.second_free) for r in q.check_double_free()}
        for s, d in sorted(want_pairs - pairs):
            problems.append(f"{mode}: missed dependence {s} -> {d}")
        for s1, s2 in sorted(truth.double_frees - frees):
            problems.append(f"{mode}: missed double free {s1},{s2}")
        if mode == FULL and exact:
            for s, d in sorted(pairs - want_pairs):
                problems.append(f"{mode}: spurious dependence {s} -> {d}")
            for s1, s2 in sorted(frees - truth.double_frees):
                problems.append(f"{mode}: spurious double free {s1},{s2}")
    return problems


def cmd_diff(args, out: TextIO, err: TextIO) -> int:
    status = 0
    for path in args.files:
        problems = compare(path, args)
        if problems:
            status = 1
            out.write(f"MISMATCH {path}\n")
            for p in problems:
                out.write(f"  {p}\n")
        else:
            out.write(f"OK {path}\n")
    return status


COMMANDS = {"build": cmd_build, "slice": cmd_slice, "check": cmd_check, "oracle": cmd_oracle, "diff": cmd_diff}


def main(argv: Optional[List[str]] = None, out: TextIO = None, err: TextIO = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # argparse: --help gives 0, errors give 2
        return int(e.code or 0)
    try:
        return COMMANDS[args.command](args, out, err)
    except (IRError, AnalysisError, QueryError, OracleRefusal, OSError) as e:
        err.write(f"guardflow: error: {e}\n")
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
