"""Command-line front end.

A session file (a pickle of the engine) carries the loaded dataset and all
adaptive state between invocations::

    adhash load data.nt --workers 4 --session data.session
    adhash query data.session --query 'SELECT ?s WHERE { ?s ex:p ?o }'
    adhash workload data.session --file workload.rq
    adhash stats data.session adaptivity

Exit codes: 0 success, 1 usage error, 2 query/data parse error, 3 runtime
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import pickle
import sys
from pathlib import Path

from .engine import Engine, RunConfig
from .model import MalformedLine
from .query import (
    DisconnectedQuery,
    QuerySyntaxError,
    UnknownPrefix,
    parse_query,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_PARSE = 2
EXIT_RUNTIME = 3

_PARSE_ERRORS = (QuerySyntaxError, DisconnectedQuery, UnknownPrefix, MalformedLine)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage problems exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="adhash",
        description="In-memory distributed engine for basic-graph-pattern queries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_load = sub.add_parser("load", help="load an N-Triples file into a session")
    p_load.add_argument("data", type=Path, help="N-Triples input file")
    p_load.add_argument("--workers", type=int, default=2)
    p_load.add_argument("--seed", type=int, default=None,
                        help="seed for the multiplicative subject hash "
                             "(default: identity hash)")
    p_load.add_argument("--session", type=Path, default=None,
                        help="session file to write (default: <data>.session)")
    p_load.add_argument("--no-adaptive", action="store_true",
                        help="disable workload monitoring and redistribution")
    p_load.add_argument("--freq-threshold", type=int, default=10,
                        help="pattern frequency that triggers redistribution")
    p_load.add_argument("--budget-pct", type=float, default=20.0,
                        help="per-worker replication budget, percent of base "
                             "triples per worker")

    p_query = sub.add_parser("query", help="run one query against a session")
    p_query.add_argument("session", type=Path)
    src = p_query.add_mutually_exclusive_group(required=True)
    src.add_argument("--query", help="query text")
    src.add_argument("--file", type=Path, help="file containing the query")
    p_query.add_argument("--explain", action="store_true",
                         help="print the execution plan")
    p_query.add_argument("--trace-messages", action="store_true",
                         help="print per-step communication volumes")

    p_work = sub.add_parser("workload",
                            help="run a ';'-separated query workload")
    p_work.add_argument("session", type=Path)
    src = p_work.add_mutually_exclusive_group(required=True)
    src.add_argument("--queries", help="workload text")
    src.add_argument("--file", type=Path, help="file containing the workload")
    p_work.add_argument("--adaptive", choices=("on", "off"), default=None,
                        help="override the session's adaptivity setting")
    p_work.add_argument("--freq-threshold", type=int, default=None)
    p_work.add_argument("--budget-pct", type=float, default=None)

    p_stats = sub.add_parser("stats", help="inspect a session")
    p_stats.add_argument("session", type=Path)
    p_stats.add_argument(
        "topic",
        choices=("predicates", "balance", "adaptivity"),
        nargs="?",
        default="predicates",
    )
    return parser


def _load_session(path: Path) -> Engine:
    with open(path, "rb") as fh:
        engine = pickle.load(fh)
    if not isinstance(engine, Engine):
        raise TypeError(f"{path} is not a session file")
    return engine


def _save_session(engine: Engine, path: Path) -> None:
    with open(path, "wb") as fh:
        pickle.dump(engine, fh)


def _cmd_load(args) -> int:
    config = RunConfig(
        num_workers=args.workers,
        hash_seed=args.seed,
        adaptive=not args.no_adaptive,
        frequency_threshold=args.freq_threshold,
        budget_percent=args.budget_pct,
    )
    engine = Engine.load(args.data, config)
    session = args.session or args.data.with_suffix(args.data.suffix + ".session")
    _save_session(engine, session)
    mx, mn, dev = engine.balance()
    print(f"loaded {engine.base_triples} triples over {args.workers} worker(s)")
    print(f"shard sizes: max={mx} min={mn} stddev={dev:.2f}")
    print(f"session written to {session}")
    return EXIT_OK


def _cmd_query(args) -> int:
    engine = _load_session(args.session)
    text = args.query if args.query is not None else args.file.read_text()
    result = engine.execute(text)
    if args.explain and result.plan is not None:
        print(result.plan.explain(parse_query(text).patterns), file=sys.stderr)
    elif args.explain:
        print(f"mode: {result.mode} (no distributed plan)", file=sys.stderr)
    if args.trace_messages and result.trace is not None:
        print(result.trace.tsv(), file=sys.stderr)
    print("\t".join(result.columns))
    for row in sorted(result.rows):
        print("\t".join(row))
    print(f"# {len(result)} row(s), mode={result.mode}, "
          f"payload_rows={result.payload_rows}", file=sys.stderr)
    _save_session(engine, args.session)
    return EXIT_OK


def _cmd_workload(args) -> int:
    engine = _load_session(args.session)
    overrides = {}
    if args.adaptive is not None:
        overrides["adaptive"] = args.adaptive == "on"
    if args.freq_threshold is not None:
        overrides["frequency_threshold"] = args.freq_threshold
    if args.budget_pct is not None:
        overrides["budget_percent"] = args.budget_pct
    if overrides:
        engine.config = dataclasses.replace(engine.config, **overrides)
        if "budget_percent" in overrides:
            engine.controller.budget_per_worker = (
                engine.config.budget_percent / 100.0 * engine.base_triples
                / engine.cluster.num_workers
            )
    text = args.queries if args.queries is not None else args.file.read_text()
    summary = engine.run_workload(text)
    print(summary.report())
    for err in summary.errors:
        print(f"error: {err}", file=sys.stderr)
    _save_session(engine, args.session)
    return EXIT_OK if not summary.errors else EXIT_PARSE


def _cmd_stats(args) -> int:
    engine = _load_session(args.session)
    if args.topic == "predicates":
        print("predicate\tcount\tsubjects\tobjects\ts_score\to_score"
              "\tper_subject\tper_object")
        print(engine.predicate_report())
    elif args.topic == "balance":
        mx, mn, dev = engine.balance()
        print(f"max={mx}\tmin={mn}\tstddev={dev:.4f}")
    else:
        print(engine.adaptivity_report())
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    handlers = {
        "load": _cmd_load,
        "query": _cmd_query,
        "workload": _cmd_workload,
        "stats": _cmd_stats,
    }
    try:
        return handlers[args.command](args)
    except _PARSE_ERRORS as exc:
        print(f"adhash: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"adhash: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"adhash: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
