#!/usr/bin/env python3
"""Walk the sitcom fixture through the evaluation modes.

Shows the default pipeline (pruned, no nullification needed), the debug
reordered run without nullification, the same run with nullification, and
the minimum union of the latter.
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))

from conftest import Q1_TEXT, SEINFELD_NT, rows_of  # noqa: E402

from bitopt.executor import RunConfig, best_match, run_query  # noqa: E402
from bitopt.parser import parse  # noqa: E402
from bitopt.store import TripleStore  # noqa: E402


def show(title, relation):
    print(f"\n{title}")
    for row in rows_of(relation):
        print("  " + "\t".join(row))


def main():
    store = TripleStore.from_ntriples(SEINFELD_NT)
    query = parse(Q1_TEXT)
    print(f"store: {store.triple_count} triples, {store.dictionary.n_p} predicates")

    result = run_query(query, store)
    show("default pipeline (pruned, nullification skipped):", result.relation)

    cfg = RunConfig(prune=False, unsafe_order=True, nullify="off", best_match="off")
    res1 = run_query(query, store, cfg).relation
    show("reordered, unpruned, no nullification:", res1)

    cfg = RunConfig(prune=False, unsafe_order=True, nullify="on", best_match="off")
    res2 = run_query(query, store, cfg).relation
    show("same order with nullification:", res2)

    show("minimum union of the nullified rows:", best_match(res2))


if __name__ == "__main__":
    main()
