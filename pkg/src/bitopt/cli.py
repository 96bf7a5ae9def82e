"""Command-line front end.

``bitopt load <dir> <file.nt>`` builds and persists a store;
``bitopt query <dir> <file.rq>`` evaluates a query and prints TSV.

Exit codes: 0 success, 2 I/O or usage problems, 3 unsupported capability,
4 rejected query.
"""

from __future__ import annotations

import argparse
import os
import sys

from .algebra import QueryRejectedError
from .distinct import distinct_eval
from .executor import RunConfig, best_match, run_query
from .explain import render_explain
from .ntriples import NTriplesError
from .oracle import OracleCapacityError, oracle_eval
from .parser import QuerySyntaxError, parse
from .patmat import UnsupportedByIndexError
from .store import StoreError, TripleStore
from .structure import DisconnectedQueryError
from .terms import render_term

EXIT_OK = 0
EXIT_IO = 2
EXIT_UNSUPPORTED = 3
EXIT_REJECTED = 4


def _build_argparser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bitopt", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    load = sub.add_parser("load", help="load an N-Triples file into a store directory")
    load.add_argument("store", nargs="?", default=None, help="store directory (default: $BITOPT_STORE)")
    load.add_argument("data", help="N-Triples input file")
    load.add_argument("--force", action="store_true", help="allow reloading into a non-empty directory")

    query = sub.add_parser("query", help="run a query against a store")
    query.add_argument("store", nargs="?", default=None, help="store directory (default: $BITOPT_STORE)")
    query.add_argument("query", help="query file")
    query.add_argument("--explain", action="store_true", help="print the plan report to stderr")
    query.add_argument("--oracle", action="store_true", help="use the brute-force evaluator")
    query.add_argument("--no-prune", action="store_true", help="skip semi-join pruning (debug)")
    query.add_argument(
        "--unsafe-order",
        action="store_true",
        help="join patterns in textual order (debug; requires --no-prune)",
    )
    query.add_argument("--nullify", choices=("auto", "on", "off"), default="auto")
    query.add_argument("--best-match", choices=("auto", "on", "off"), default="auto")
    query.add_argument("-o", "--output", default=None, help="write TSV here instead of stdout")
    return ap


def _store_dir(arg: "str | None") -> str:
    directory = arg or os.environ.get("BITOPT_STORE")
    if not directory:
        raise SystemExit("no store directory given and BITOPT_STORE unset")
    return directory


def cmd_load(args) -> int:
    directory = _store_dir(args.store)
    if os.path.isdir(directory) and os.listdir(directory) and not args.force:
        print(f"error: {directory} is not empty (use --force to reload)", file=sys.stderr)
        return EXIT_IO
    try:
        with open(args.data, "rb") as fh:
            store = TripleStore.from_ntriples(fh.read())
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NTriplesError as exc:
        print(f"error: {args.data}: {exc}", file=sys.stderr)
        return EXIT_IO
    store.save(directory)
    d = store.dictionary
    print(
        f"{store.triple_count} triples, {d.n_p} predicates, "
        f"{d.n_s} subjects, {d.n_o} objects ({d.n_so} shared)"
    )
    return EXIT_OK


def _emit(relation, header, out) -> None:
    out.write("\t".join(str(v) for v in header) + "\n")
    for row in relation.sorted_rows():
        out.write("\t".join(render_term(t) for t in row) + "\n")


def cmd_query(args) -> int:
    if args.unsafe_order and not args.no_prune:
        print("error: --unsafe-order requires --no-prune", file=sys.stderr)
        return EXIT_IO
    directory = _store_dir(args.store)
    try:
        store = TripleStore.open(directory)
        with open(args.query, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, StoreError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        query = parse(text)
    except QuerySyntaxError as exc:
        print(f"error: syntax: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except QueryRejectedError as exc:
        print(f"error: rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED

    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        if args.oracle:
            relation = oracle_eval(query, store.term_triples())
            from .executor import Relation

            projected = Relation(
                tuple(query.projection),
                [
                    tuple(row.get(v) for v in query.projection)
                    for row in relation.rows
                ],
            )
            if query.distinct:
                projected = projected.distinct()
            _emit(projected, query.projection, out)
            return EXIT_OK
        config = RunConfig(
            prune=not args.no_prune,
            unsafe_order=args.unsafe_order,
            nullify=args.nullify,
            best_match=getattr(args, "best_match"),
        )
        if query.distinct:
            outcome = distinct_eval(query, store, config)
            if args.explain:
                result = run_query(query, store, config)
                report = render_explain(
                    query, result, [f"distinct.path={outcome.path}"] + [f"distinct.{ln}" for ln in outcome.mcs_trace]
                )
                sys.stderr.write(report)
            _emit(outcome.relation, query.projection, out)
            return EXIT_OK
        result = run_query(query, store, config)
        if args.explain:
            sys.stderr.write(render_explain(query, result))
        _emit(result.relation.project(query.projection), query.projection, out)
        return EXIT_OK
    except UnsupportedByIndexError as exc:
        print(f"error: unsupported-by-index: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except DisconnectedQueryError as exc:
        print(f"error: rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except QueryRejectedError as exc:
        print(f"error: rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except OracleCapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    finally:
        if args.output:
            out.close()


def main(argv: "list[str] | None" = None) -> int:
    args = _build_argparser().parse_args(argv)
    if args.command == "load":
        return cmd_load(args)
    return cmd_query(args)


if __name__ == "__main__":
    raise SystemExit(main())
