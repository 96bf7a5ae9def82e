"""Pipelined evaluation: pattern ordering, the multi-way join with
backtracking and NULL extension, nullification, best-match, and the full
query pipeline (filter placement, per-component pruning, union-normal-form
expansion, per-disjunct joins, minimum union where required).

The join keeps no intermediate tables: its only mutable state is one
variable-binding map plus a recursion stack bounded by the pattern count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

from .algebra import (
    Bgp,
    Filter,
    Join,
    LeftJoin,
    PatternNode,
    Query,
    Union,
    Variable,
    coalesce_bgps,
    eval_filter,
    iter_nodes,
    node_patterns,
    node_vars,
)
from .patmat import PatternMatrix, UnsupportedByIndexError
from .pruning import PruneContext, PruneSchedule, load_matrices, prune_triples
from .rewriter import ScopedConjunct, collect_scoped_conjuncts, to_unf, push_filters
from .store import Coord, TripleStore
from .structure import (
    DisconnectedQueryError,
    Gosn,
    Got,
    StructureReport,
    build_gosn,
    build_got,
    check_property_one,
    classify,
)
from .terms import Term, term_sort_key

BOUND = "bound"
FAILED = "failed"
SKIPPED = "skipped"


@dataclass
class RunConfig:
    prune: bool = True
    unsafe_order: bool = False
    nullify: str = "auto"  # auto | on | off
    best_match: str = "auto"  # auto | on | off
    force_nullify_per_disjunct: bool = False


@dataclass
class Relation:
    """Ordered bag of rows over a fixed variable header; NULL is None."""

    header: tuple[Variable, ...]
    rows: list[tuple["Term | None", ...]] = field(default_factory=list)

    def sorted_rows(self) -> list[tuple["Term | None", ...]]:
        def key(row):
            return tuple(
                (0,) if t is None else (1,) + term_sort_key(t) for t in row
            )

        return sorted(self.rows, key=key)

    def project(self, variables: tuple[Variable, ...]) -> "Relation":
        idx = [self.header.index(v) for v in variables]
        return Relation(variables, [tuple(row[i] for i in idx) for row in self.rows])

    def distinct(self) -> "Relation":
        seen = set()
        out = []
        for row in self.sorted_rows():
            if row not in seen:
                seen.add(row)
                out.append(row)
        return Relation(self.header, out)


def subsumes(r1: tuple, r2: tuple) -> bool:
    """True iff every non-null binding of r1 equals r2's and r2 binds
    strictly more (same header assumed)."""
    strictly_more = False
    for a, b in zip(r1, r2):
        if a is None:
            if b is not None:
                strictly_more = True
        elif a != b:
            return False
    return strictly_more


def best_match(relation: Relation) -> Relation:
    """Minimum union: drop every row subsumed by a surviving row; exact
    duplicates collapse. Sort by descending non-null count, then one pass
    where each row is checked against the already-kept rows."""
    order = sorted(
        relation.sorted_rows(),
        key=lambda row: -sum(1 for t in row if t is not None),
    )
    kept: list[tuple] = []
    seen: set[tuple] = set()
    for row in order:
        if row in seen:
            continue
        if any(subsumes(row, other) for other in kept):
            continue
        seen.add(row)
        kept.append(row)
    return Relation(relation.header, Relation(relation.header, kept).sorted_rows())


# ---------------------------------------------------------------------------
# Pattern ordering


def build_stps(gosn: Gosn, got: Got, matrices: dict[int, PatternMatrix]) -> list[int]:
    """tporder: absolute-master patterns ascending by surviving count, then
    the remaining supernodes in master-slave order with peers ascending by
    count; stps reorders tporder so every pattern connects to an earlier one."""
    sn_rank = {sid: i for i, sid in enumerate(gosn.topo_order())}
    tporder = sorted(
        (tp.index for sn in gosn.supernodes.values() for tp in sn.patterns),
        key=lambda idx: (
            sn_rank[gosn.sn_of_pattern[idx]],
            matrices[idx].count,
            idx,
        ),
    )
    if not tporder:
        return []
    stps = [tporder[0]]
    remaining = tporder[1:]
    while remaining:
        for idx in remaining:
            if any(got.label(idx, prev) for prev in stps):
                stps.append(idx)
                remaining.remove(idx)
                break
        else:
            raise DisconnectedQueryError(
                "query pattern graph is disconnected; only the brute-force "
                "evaluator supports Cartesian queries"
            )
    return stps


# ---------------------------------------------------------------------------
# Multi-way pipelined join


@dataclass
class JoinStats:
    max_vmap_cells: int = 0
    max_depth: int = 0
    rows_emitted: int = 0
    nullified_rows: int = 0


class MultiWayJoin:
    """Depth-first enumeration over the stps order.

    The first pattern enumerates its triples; each later pattern enumerates
    triples consistent with the binding map. A slave pattern with no
    consistent triple NULL-extends: its whole supernode closure is marked
    skipped so the optional block fails as a unit. An absolute-master
    mismatch backtracks. At full depth nullification (when required) and the
    residual filter conjuncts run before the row is emitted.
    """

    def __init__(
        self,
        gosn: Gosn,
        got: Got,
        matrices: dict[int, PatternMatrix],
        stps: list[int],
        store: TripleStore,
        nulreqd: bool,
        residual: list[ScopedConjunct],
        header: tuple[Variable, ...],
    ):
        self.gosn = gosn
        self.got = got
        self.matrices = matrices
        self.stps = stps
        self.store = store
        self.nulreqd = nulreqd
        self.residual = residual
        self.header = header
        self.by_index = {idx: matrices[idx] for idx in stps}
        self.stats = JoinStats()
        self.nullified_any = False
        self._var_home: dict[Variable, int] = self._compute_homes()
        self._sn_vars = {
            sid: gosn.sn_vars(sid) for sid in gosn.supernodes
        }

    def _compute_homes(self) -> dict[Variable, int]:
        rank = {sid: i for i, sid in enumerate(self.gosn.topo_order())}
        homes: dict[Variable, int] = {}
        for sid, sn in self.gosn.supernodes.items():
            for tp in sn.patterns:
                for v in tp.vars():
                    if v not in homes or rank[sid] < rank[homes[v]]:
                        homes[v] = sid
        return homes

    def run(self) -> Iterator[dict[Variable, "Coord | None"]]:
        vmap: dict[Variable, "Coord | None"] = {}
        status: dict[int, str] = {}
        yield from self._recurse(0, vmap, status)

    def _recurse(self, depth: int, vmap, status) -> Iterator[dict]:
        self.stats.max_depth = max(self.stats.max_depth, depth + 1)
        self.stats.max_vmap_cells = max(self.stats.max_vmap_cells, len(vmap))
        if depth == len(self.stps):
            row = self._finish(dict(vmap), status)
            if row is not None:
                self.stats.rows_emitted += 1
                yield row
            return
        idx = self.stps[depth]
        if status.get(idx) == SKIPPED:
            yield from self._recurse(depth + 1, vmap, status)
            return
        pm = self.by_index[idx]
        matched = False
        for binding in pm.bindings(vmap, self.store.dictionary):
            matched = True
            added = [v for v in binding if v not in vmap]
            vmap.update(binding)
            status[idx] = BOUND
            yield from self._recurse(depth + 1, vmap, status)
            for v in added:
                del vmap[v]
            del status[idx]
        if matched:
            return
        if self.gosn.is_abs_pattern(pm.pattern):
            return  # absolute masters cannot take NULL bindings: backtrack
        # Fail the whole optional block: this supernode's unvisited patterns
        # and every transitive slave go NULL together.
        closure = self.gosn.slave_closure(pm.sid)
        to_skip = [
            j
            for j in self.stps[depth + 1 :]
            if self.gosn.sn_of_pattern[self.by_index[j].pattern.index] in closure
            and status.get(j) is None
        ]
        nulled = []
        for j in [idx] + to_skip:
            for v in self.by_index[j].vars():
                if v not in vmap:
                    vmap[v] = None
                    nulled.append(v)
        status[idx] = FAILED
        for j in to_skip:
            status[j] = SKIPPED
        yield from self._recurse(depth + 1, vmap, status)
        for v in nulled:
            del vmap[v]
        del status[idx]
        for j in to_skip:
            del status[j]

    # -- row post-processing -------------------------------------------------

    def _finish(self, vmap, status) -> "dict | None":
        if self.nulreqd:
            self._nullify_inconsistent(vmap, status)
        for sc in self.residual:
            verdict = eval_filter(
                sc.conjunct,
                lambda v: None
                if vmap.get(v) is None
                else self.store.dictionary.term_of(vmap[v]),
            )
            if verdict is True:
                continue
            slave_homes = sorted(
                {
                    self._var_home[v]
                    for v in sc.vars
                    if self._var_home.get(v, self.gosn.abs_id) != self.gosn.abs_id
                }
            )
            if not slave_homes:
                return None  # filter over master bindings only: drop the row
            for sid in slave_homes:
                self._null_supernodes(vmap, self.gosn.slave_closure(sid))
        return vmap

    def _nullify_inconsistent(self, vmap, status) -> None:
        """Null every slave supernode where some pattern bound a triple while
        a peer failed, plus the transitive slaves of anything nulled."""
        rank = {sid: i for i, sid in enumerate(self.gosn.topo_order())}
        bad: set[int] = set()
        for sid, sn in self.gosn.supernodes.items():
            if sid == self.gosn.abs_id:
                continue
            states = {status.get(tp.index) for tp in sn.patterns}
            if BOUND in states and (FAILED in states or SKIPPED in states):
                bad.add(sid)
        closure: set[int] = set()
        for sid in sorted(bad, key=lambda s: rank[s]):
            closure |= self.gosn.slave_closure(sid)
        if closure:
            self._null_supernodes(vmap, closure)

    def _null_supernodes(self, vmap, closure: set[int]) -> None:
        protected: set[Variable] = set()
        for sid in self.gosn.supernodes:
            if sid not in closure:
                protected |= self._sn_vars[sid]
        for sid in closure:
            for v in self._sn_vars[sid]:
                if v not in protected and vmap.get(v) is not None:
                    vmap[v] = None
                    self.nullified_any = True
                    self.stats.nullified_rows += 1


def nullification(
    vmap: dict[Variable, "Coord | None"],
    status: dict[int, str],
    gosn: Gosn,
    store: TripleStore,
) -> dict[Variable, "Coord | None"]:
    """Standalone nullification of one completed binding map (the in-join
    hook uses the same logic via MultiWayJoin)."""
    join = object.__new__(MultiWayJoin)
    join.gosn = gosn
    join.store = store
    join.nullified_any = False
    join.stats = JoinStats()
    join._sn_vars = {sid: gosn.sn_vars(sid) for sid in gosn.supernodes}
    out = dict(vmap)
    MultiWayJoin._nullify_inconsistent(join, out, status)
    return out


# ---------------------------------------------------------------------------
# Pipeline


@dataclass
class DisjunctTrace:
    algebra: str
    gosn: Gosn
    got: Got
    report: StructureReport
    nulreqd: bool
    stps: list[int]
    stats: JoinStats
    nullified_any: bool


@dataclass
class EngineResult:
    relation: Relation  # full rows over all query variables
    rule3_used: bool
    best_match_applied: bool
    disjuncts: list[DisjunctTrace]
    schedules: list[tuple[str, PruneSchedule]]
    matrices: dict[int, PatternMatrix]


def union_free_components(node: PatternNode) -> list[PatternNode]:
    """Maximal UNION-free subtrees, left to right."""
    if not any(isinstance(sub, Union) for sub in iter_nodes(node)):
        return [node]
    if isinstance(node, Union):
        return union_free_components(node.left) + union_free_components(node.right)
    if isinstance(node, Filter):
        return union_free_components(node.inner)
    return union_free_components(node.left) + union_free_components(node.right)


def _reject_unsupported(query: Query) -> None:
    for tp in node_patterns(query.root):
        if isinstance(tp.p, Variable):
            raise UnsupportedByIndexError(
                f"{tp.label} has a variable predicate (unsupported-by-index)"
            )


def run_query(query: Query, store: TripleStore, config: "RunConfig | None" = None) -> EngineResult:
    """Evaluate one query: push filters, prune each UNION-free component,
    expand to union normal form, run the pipelined join per disjunct, then
    union all and apply best-match when a disjunct nullified something or
    the slave-side union rewrite was used."""
    config = config or RunConfig()
    _reject_unsupported(query)
    pushed = push_filters(query.root)
    all_vars = tuple(sorted(node_vars(pushed), key=lambda v: v.name))

    # Prune once per union-free component; disjuncts share the results.
    matrices: dict[int, PatternMatrix] = {}
    schedules: list[tuple[str, PruneSchedule]] = []
    applied_conjuncts: set[int] = set()
    for comp in union_free_components(pushed):
        comp_norm = coalesce_bgps(comp)
        gosn = build_gosn(comp_norm)
        got = build_got(gosn)
        report = classify(gosn, got)
        scoped = collect_scoped_conjuncts(comp_norm)
        comp_matrices, applied = load_matrices(
            store,
            gosn,
            got,
            scoped,
            active_prune=config.prune,
            loadtime_filters=config.prune,
        )
        applied_conjuncts |= applied
        ctx = PruneContext(store, gosn, got, report, comp_matrices)
        if config.prune:
            schedule = prune_triples(ctx)
            label = serialize_component(comp_norm)
            schedules.append((label, schedule))
        matrices.update(comp_matrices)

    unf = to_unf(pushed)
    disjunct_rows: list[tuple[tuple[Variable, ...], list[dict]]] = []
    traces: list[DisjunctTrace] = []
    any_nullified = False
    for disjunct in unf.disjuncts:
        norm = coalesce_bgps(disjunct)
        gosn = build_gosn(norm)
        got = build_got(gosn)
        report = classify(gosn, got)
        if not report.connected:
            raise DisconnectedQueryError(
                "query pattern graph is disconnected; only the brute-force "
                "evaluator supports Cartesian queries"
            )
        if not check_property_one(gosn, got):
            # Disconnected absolute-master block: a Cartesian product that the
            # masters-first pipelined order cannot serve.
            raise DisconnectedQueryError(
                "absolute-master patterns form a Cartesian product; only the "
                "brute-force evaluator supports Cartesian queries"
            )
        for idx, pm in matrices.items():
            if idx in gosn.sn_of_pattern:
                pm.sid = gosn.sn_of_pattern[idx]
        if config.nullify == "on" or config.force_nullify_per_disjunct:
            nulreqd = True
        elif config.nullify == "off":
            nulreqd = False
        else:
            nulreqd = report.nb_required or not config.prune
        if config.unsafe_order:
            stps = sorted(tp.index for tp in node_patterns(norm))
        else:
            stps = build_stps(gosn, got, matrices)
        residual = [
            sc
            for sc in collect_scoped_conjuncts(norm)
            if id(sc.conjunct) not in applied_conjuncts
        ]
        dvars = tuple(sorted(node_vars(norm), key=lambda v: v.name))
        join = MultiWayJoin(
            gosn, got, matrices, stps, store, nulreqd, residual, dvars
        )
        rows = list(join.run())
        any_nullified |= join.nullified_any
        traces.append(
            DisjunctTrace(
                serialize_component(norm),
                gosn,
                got,
                report,
                nulreqd,
                stps,
                join.stats,
                join.nullified_any,
            )
        )
        disjunct_rows.append((dvars, rows))

    relation = Relation(all_vars)
    d = store.dictionary
    for dvars, rows in disjunct_rows:
        for vmap in rows:
            relation.rows.append(
                tuple(
                    None
                    if v not in vmap or vmap[v] is None
                    else d.term_of(vmap[v])
                    for v in all_vars
                )
            )

    if config.best_match == "on":
        apply_bm = True
    elif config.best_match == "off":
        apply_bm = False
    else:
        apply_bm = any_nullified or unf.rule3_used
    if apply_bm:
        relation = best_match(relation)
    return EngineResult(relation, unf.rule3_used, apply_bm, traces, schedules, matrices)


def serialize_component(node: PatternNode) -> str:
    """Compact rendering with actual pattern labels instead of P-numbering."""
    from .algebra import JOIN_SYM, LEFTJOIN_SYM, UNION_SYM

    def walk(n: PatternNode, top: bool) -> str:
        if isinstance(n, Bgp):
            return "{" + " ".join(tp.label for tp in n.patterns) + "}"
        if isinstance(n, Filter):
            inner = walk(n.inner, False)
            text = f"{inner} F({n.expr})"
            return text if top else f"({text})"
        sym = {Join: JOIN_SYM, LeftJoin: LEFTJOIN_SYM, Union: UNION_SYM}[type(n)]
        text = f"{walk(n.left, False)} {sym} {walk(n.right, False)}"
        return text if top else f"({text})"

    return walk(node, True)


def project_rows(result: EngineResult, query: Query) -> Relation:
    return result.relation.project(query.projection)
