#!/usr/bin/env python3
"""Randomized engine-vs-reference agreement run with a small breakdown.

Generates seeded stores and well-designed queries, evaluates each with the
optimized pipeline and the brute-force evaluator, and compares the results
after minimum-union normalization. Prints counts per structural class.

Usage: python scripts/agreement_experiment.py [n_queries] [seed]
"""

import random
import sys
import time
from collections import Counter

from bitopt.executor import best_match, run_query
from bitopt.oracle import oracle_eval
from bitopt.executor import Relation
from bitopt.store import TripleStore
from bitopt.structure import DisconnectedQueryError
from bitopt.workload import GenConfig, random_query, random_store_text


def main():
    total = int(sys.argv[1]) if len(sys.argv) > 1 else 300
    base_seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    cfg = GenConfig(p_optional=0.7, p_union=0.3, p_filter=0.3, p_cycle=0.25)
    stats = Counter()
    started = time.perf_counter()
    seed = base_seed
    while stats["ran"] < total:
        rng = random.Random(seed)
        seed += 1
        store = TripleStore.from_ntriples(random_store_text(rng, cfg))
        query = random_query(rng, cfg)
        try:
            result = run_query(query, store)
        except DisconnectedQueryError:
            stats["rejected-cartesian"] += 1
            continue
        stats["ran"] += 1
        for trace in result.disjuncts:
            stats["nb-required" if trace.nulreqd else "nb-skipped"] += 1
        if result.rule3_used:
            stats["rule3"] += 1
        engine = result.relation.project(query.projection)
        raw = oracle_eval(query, store.term_triples())
        reference = Relation(
            query.projection,
            [tuple(r.get(v) for v in query.projection) for r in raw.rows],
        )
        if frozenset(best_match(engine).rows) == frozenset(best_match(reference).rows):
            stats["agreed"] += 1
        else:
            stats["MISMATCH"] += 1
            print(f"mismatch at seed {seed - 1}")
    elapsed = time.perf_counter() - started
    print(f"{stats['ran']} queries in {elapsed:.1f}s")
    for key in sorted(stats):
        print(f"  {key:>20}: {stats[key]}")
    if stats["MISMATCH"]:
        sys.exit(1)


if __name__ == "__main__":
    main()
