"""Command-line front end: ``ctxlang check | run | dump-core | bench``.

Exit codes: 0 success, 1 compile or run failure, 2 usage error.
"""

import argparse
import sys
from pathlib import Path
from typing import (
    List,
    Optional,
    Sequence,
)

from .__version__ import __version__
from .bench import (
    BenchFamily,
    grid,
    run_bench,
    write_csv,
)
from .compiler import (
    Compiler,
    CtxlangConfig,
)
from .exceptions import (
    CtxCompileError,
    CtxFileNotFoundError,
    CtxValueError,
    PriorityCycleError,
)
from .logger import logger_setup
from .parser import ParseStats


EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--path",
        "-p",
        action="append",
        default=[],
        metavar="DIR",
        help="Directory searched for <Name>.ctx (repeatable)",
    )
    common.add_argument("--stats", action="store_true", help="Print parse statistics of the main unit to stderr as one CSV row")
    common.add_argument("--trace-parse", action="store_true", help="Log every parser memo evaluation")
    common.add_argument(
        "--log",
        nargs="?",
        const="ctxlang.log",
        default=None,
        metavar="FILE",
        help="Also write the log to FILE",
    )

    parser = argparse.ArgumentParser(prog="ctxlang", description="Compile and run ctxlang programs")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    check_parser = subparsers.add_parser("check", parents=[common], help="Load, link and type-check files")
    check_parser.add_argument("files", nargs="+", type=Path)

    run_parser = subparsers.add_parser("run", parents=[common], help="Compile and run a program")
    run_parser.add_argument("file", type=Path)
    run_parser.add_argument("--vfs", type=Path, metavar="DIR", help="Directory mapped into the virtual filesystem")

    dump_parser = subparsers.add_parser("dump-core", parents=[common], help="Print the lowered Core IR")
    dump_parser.add_argument("file", type=Path)

    bench_parser = subparsers.add_parser("bench", help="Run the parser scaling benchmarks")
    bench_parser.add_argument(
        "--family",
        choices=[f.value for f in BenchFamily],
        action="append",
        help="Benchmark family (repeatable, default both)",
    )
    bench_parser.add_argument("--max-p", type=int, default=64, help="Largest number of operators")
    bench_parser.add_argument("--min-p", type=int, default=8, help="Smallest number of operators")
    bench_parser.add_argument("--depth", type=int, action="append", help="Nesting depth (repeatable, default 1)")
    bench_parser.add_argument("--trials", type=int, default=5, help="Timed repetitions per point")
    bench_parser.add_argument("--out", type=Path, help="Write the CSV to this file instead of stdout")
    bench_parser.add_argument("--no-time", action="store_true", help="Leave out the time column")
    return parser


def _print_stats(stats: Optional[ParseStats]) -> None:
    if stats is None:
        return
    # input_length,languages_seen,memo_entries,evaluations,wall_time_ns
    fields = (stats.input_length, stats.languages_seen, stats.memo_entries, stats.evaluations, stats.wall_time_ns)
    print(",".join(str(f) for f in fields), file=sys.stderr)


def _compiler(args: argparse.Namespace, vfs_dir: Optional[Path] = None) -> Compiler:
    return Compiler(
        CtxlangConfig(
            search_paths=args.path,
            vfs_dir=vfs_dir,
            trace_parse=args.trace_parse,
            collect_stats=args.stats,
        )
    )


def _check(args: argparse.Namespace) -> int:
    compiler = _compiler(args)
    code = EXIT_OK
    for path in args.files:
        try:
            compilation = compiler.compile(path=path)
        except CtxCompileError as err:
            print(err.diagnostics, file=sys.stderr)
            code = EXIT_FAILURE
            continue
        print(f"{path}: ok")
        _print_stats(compilation.stats)
    return code


def _run(args: argparse.Namespace) -> int:
    compiler = _compiler(args, args.vfs)
    try:
        compilation = compiler.compile(path=args.file)
    except CtxCompileError as err:
        print(err.diagnostics, file=sys.stderr)
        return EXIT_FAILURE
    _print_stats(compilation.stats)
    result = compiler.run(compilation)
    sys.stdout.write(result.stdout)
    sys.stderr.write(result.stderr)
    return result.exit_code


def _dump_core(args: argparse.Namespace) -> int:
    try:
        compilation = _compiler(args).compile(path=args.file)
    except CtxCompileError as err:
        print(err.diagnostics, file=sys.stderr)
        return EXIT_FAILURE
    sys.stdout.write(compilation.dump_core())
    return EXIT_OK


def _bench(args: argparse.Namespace) -> int:
    families = [BenchFamily(f) for f in (args.family or [f.value for f in BenchFamily])]
    configs = grid(families, args.depth or [1], args.max_p, args.min_p, args.trials)
    rows = run_bench(configs, with_time=not args.no_time)
    if args.out is not None:
        with open(args.out, "w", encoding="utf-8", newline="") as stream:
            write_csv(rows, stream, with_time=not args.no_time)
    else:
        write_csv(rows, sys.stdout, with_time=not args.no_time)
    return EXIT_OK if len(rows) == len(configs) else EXIT_FAILURE


_COMMANDS = {
    "check": _check,
    "run": _run,
    "dump-core": _dump_core,
    "bench": _bench,
}


def cmd(argv: Optional[Sequence[str]] = None) -> int:
    """Run the command line ``argv`` and return its exit code."""
    parser = _parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exit_:
        return EXIT_OK if exit_.code in (0, None) else EXIT_USAGE

    if not args.command:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    if getattr(args, "trace_parse", False):
        logger_setup.enable_parse_trace()
    if getattr(args, "log", None):
        logger_setup.setup_file_logging(args.log)

    try:
        return _COMMANDS[args.command](args)
    except (PriorityCycleError, CtxFileNotFoundError, CtxValueError) as err:
        print(f"error: {err}", file=sys.stderr)
    return EXIT_FAILURE


def main(argv: Optional[List[str]] = None) -> None:
    sys.exit(cmd(argv))


if __name__ == "__main__":
    main()
