"""DISTINCT evaluation.

On acyclic, pruned, union- and filter-free queries the distinct projection
is answered from a minimal covering subgraph of the pattern graph: edges
labeled only by a non-projected variable are contracted by Boolean matrix
multiplication, which correlates the endpoint bindings directly and drops
the shared variable. Projections here deduplicate by equality and
subsumption, matching the minimum-union treatment of optional blocks, so
the matrix path and the naive evaluate-then-dedup path agree. Every other
shape (distinct variables confined to optional blocks, cycles, unions,
filters) uses the naive path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .algebra import Filter, Query, Union, Variable, iter_nodes
from .bitmat import BitMat, bmm, transpose
from .executor import EngineResult, Relation, RunConfig, best_match, run_query
from .patmat import PatternMatrix
from .store import TripleStore
from .structure import Gosn, Got

SKIPPED = "skipped"


@dataclass
class McsNode:
    """One covering-subgraph node: an original pattern matrix or a product."""

    nid: int
    matrix: PatternMatrix
    sid: int

    @property
    def vars(self) -> frozenset[Variable]:
        return frozenset(self.matrix.vars())

    @property
    def label(self) -> str:
        return self.matrix.label if self.matrix.pattern is not None else f"B{self.nid}"


@dataclass
class Mcs:
    nodes: dict[int, McsNode]
    edges: dict[frozenset[int], frozenset[Variable]]
    distinct_vars: frozenset[Variable]
    history: list[int] = field(default_factory=list)  # node count per step
    evolution: list[str] = field(default_factory=list)  # snapshot per step

    def edge_list(self) -> list[tuple[int, int, frozenset[Variable]]]:
        out = []
        for pair, label in self.edges.items():
            i, j = sorted(pair)
            out.append((i, j, label))
        return sorted(out, key=lambda t: (t[0], t[1]))

    def edges_at(self, nid: int) -> list[tuple[frozenset[int], frozenset[Variable]]]:
        return [(pair, lab) for pair, lab in self.edges.items() if nid in pair]

    def connected(self) -> bool:
        ids = sorted(self.nodes)
        if len(ids) <= 1:
            return True
        seen = {ids[0]}
        frontier = [ids[0]]
        while frontier:
            cur = frontier.pop()
            for pair in self.edges:
                if cur in pair:
                    other = next(iter(pair - {cur}))
                    if other not in seen:
                        seen.add(other)
                        frontier.append(other)
        return set(ids) <= seen

    def describe(self) -> str:
        nodes = ",".join(self.nodes[n].label for n in sorted(self.nodes))
        edges = " ".join(
            f"{self.nodes[i].label}-{self.nodes[j].label}"
            f"{{{','.join(sorted(str(v) for v in lab))}}}"
            for i, j, lab in self.edge_list()
        )
        return f"nodes=[{nodes}] edges=[{edges}]"


def carve_mcs(
    got: Got,
    gosn: Gosn,
    matrices: dict[int, PatternMatrix],
    requirements: dict[int, frozenset[Variable]],
    universe: set[int],
) -> Mcs:
    """Smallest connected pattern set meeting the per-supernode coverage
    requirements.

    ``requirements`` maps a supernode to the distinct variables its own
    patterns must keep covering (a dominated variable is covered by the
    master instead and does not appear here). Start from the patterns
    carrying required variables, connect them via shortest paths, then drop
    any pattern whose distinct variables a neighbor also binds, as long as
    coverage and connectivity survive.
    """
    dvars: frozenset[Variable] = frozenset()
    for need in requirements.values():
        dvars |= need

    def sid_of(idx: int) -> int:
        return gosn.sn_of_pattern[idx]

    marked = sorted(
        idx
        for idx in universe
        if requirements.get(sid_of(idx), frozenset()) & frozenset(matrices[idx].vars())
    )
    keep: set[int] = set(marked)
    for other in marked[1:]:
        keep |= set(_shortest_path(got, marked[0], other, universe))

    def ok(trial: set[int]) -> bool:
        for sid, need in requirements.items():
            covered: frozenset[Variable] = frozenset()
            for idx in trial:
                if sid_of(idx) == sid:
                    covered |= need & frozenset(matrices[idx].vars())
            if covered != need:
                return False
        return _connected_in(got, trial)

    changed = True
    while changed:
        changed = False
        for idx in sorted(keep):
            mine = dvars & frozenset(matrices[idx].vars())
            has_cover = any(
                j != idx and got.label(idx, j) and mine <= frozenset(matrices[j].vars())
                for j in keep
            )
            if not (has_cover or not mine):
                continue
            trial = keep - {idx}
            if trial and ok(trial):
                keep = trial
                changed = True
                break
    nodes = {idx: McsNode(idx, matrices[idx], sid_of(idx)) for idx in sorted(keep)}
    edges = {pair: label for pair, label in got.edges.items() if pair <= keep}
    return Mcs(nodes, edges, dvars)


def _connected_in(got: Got, keep: set[int]) -> bool:
    ids = sorted(keep)
    if not ids:
        return False
    seen = {ids[0]}
    frontier = [ids[0]]
    while frontier:
        cur = frontier.pop()
        for j in ids:
            if j not in seen and got.label(cur, j):
                seen.add(j)
                frontier.append(j)
    return set(ids) <= seen


def _shortest_path(got: Got, a: int, b: int, universe: set[int]) -> list[int]:
    from collections import deque

    prev = {a: a}
    queue = deque([a])
    while queue:
        cur = queue.popleft()
        if cur == b:
            break
        for nxt in got.neighbors(cur, universe):
            if nxt not in prev:
                prev[nxt] = cur
                queue.append(nxt)
    if b not in prev:
        return [a, b]
    path = [b]
    while path[-1] != a:
        path.append(prev[path[-1]])
    return path


# ---------------------------------------------------------------------------
# Shrinking by Boolean matrix multiplication


def _with_var_on_rows(matrix: PatternMatrix, var: Variable) -> BitMat:
    if matrix.row_var == var:
        return matrix.bm
    return transpose(matrix.bm)


def _with_var_on_cols(matrix: PatternMatrix, var: Variable) -> BitMat:
    if matrix.col_var == var:
        return matrix.bm
    return transpose(matrix.bm)


def _other_var(matrix: PatternMatrix, var: Variable) -> "Variable | None":
    return matrix.col_var if matrix.row_var == var else matrix.row_var


def shrink_mcs(mcs: Mcs, gosn: Gosn, so_count: int) -> Mcs:
    """Contract edges whose single-variable labels carry no distinct
    variable.

    The product of the two endpoint matrices eliminates the shared variable,
    so an edge is only contractible while that variable labels no other edge
    of either endpoint: a second occurrence means the variable still glues
    separate parts of the subgraph together, and dropping it there would cut
    the correlation the product cannot re-create. Between peers both
    endpoints fold into the product; across a master-slave pair only the
    slave does, because the master side still drives the optional-block NULL
    semantics (and the fresh master-product edge is never contracted again,
    which would just resurrect the eliminated variable). The matrix count
    never increases, and the loop stops once every remaining label carries a
    distinct variable or nothing is safely contractible.
    """
    next_id = max(mcs.nodes, default=0) + 1000
    mcs.history.append(len(mcs.nodes))
    rank = {sid: i for i, sid in enumerate(gosn.topo_order())}

    def category(a: McsNode, b: McsNode) -> "int | None":
        if a.sid == b.sid:
            return 0 if a.sid == gosn.abs_id else 2
        if a.sid in gosn.masters.get(b.sid, frozenset()):
            return 1
        if b.sid in gosn.masters.get(a.sid, frozenset()):
            return 1
        return None  # cross-slave edges are ignored

    def variable_confined_to(edge: frozenset[int], var: Variable) -> bool:
        for pair, lab in mcs.edges.items():
            if pair != edge and pair & edge and var in lab:
                return False
        return True

    skipped: set[frozenset[int]] = set()
    while len(mcs.nodes) > 1:
        candidate = None
        for i, j, label in mcs.edge_list():
            if frozenset((i, j)) in skipped:
                continue
            if len(label) != 1 or label & mcs.distinct_vars:
                continue
            (shared,) = tuple(label)
            if not variable_confined_to(frozenset((i, j)), shared):
                continue
            ni, nj = mcs.nodes[i], mcs.nodes[j]
            if ni.matrix.row_var == ni.matrix.col_var or nj.matrix.row_var == nj.matrix.col_var:
                continue
            cat = category(ni, nj)
            if cat is None:
                continue
            key = (cat, max(rank[ni.sid], rank[nj.sid]), i, j)
            if candidate is None or key < candidate[0]:
                candidate = (key, i, j, label, cat)
        if candidate is None:
            break
        _, i, j, label, cat = candidate
        ni, nj = mcs.nodes[i], mcs.nodes[j]
        if cat == 1 and rank[nj.sid] < rank[ni.sid]:
            ni, nj = nj, ni
            i, j = j, i
        (shared,) = tuple(label)
        product = bmm(
            _with_var_on_cols(ni.matrix, shared),
            _with_var_on_rows(nj.matrix, shared),
            so_count,
        )
        node = McsNode(
            next_id,
            PatternMatrix(None, _other_var(ni.matrix, shared), _other_var(nj.matrix, shared), product, sid=nj.sid),
            nj.sid,
        )
        next_id += 1
        removed = {j} if cat == 1 else {i, j}

        inherited: dict[frozenset[int], frozenset[Variable]] = {}
        for nid in removed:
            for pair, lab in mcs.edges_at(nid):
                if pair == frozenset((i, j)):
                    continue
                other = next(iter(pair - {nid}))
                if other not in removed:
                    # Always holds: the eliminated variable is confined to
                    # the contracted edge, so the label lives in the product.
                    assert lab <= node.vars
                    inherited[frozenset((node.nid, other))] = lab
        for pair in [p for p in mcs.edges if p & removed]:
            del mcs.edges[pair]
        for nid in removed:
            del mcs.nodes[nid]
        mcs.nodes[node.nid] = node
        mcs.edges.update(inherited)
        for nid in {i, j} - removed:
            connector = frozenset(mcs.nodes[nid].vars) & node.vars
            if connector:
                new_edge = frozenset((nid, node.nid))
                mcs.edges[new_edge] = connector
                skipped.add(new_edge)
        mcs.history.append(len(mcs.nodes))
        mcs.evolution.append(mcs.describe())
        assert mcs.history[-1] <= mcs.history[-2], "shrink step grew the covering subgraph"
    return mcs


# ---------------------------------------------------------------------------
# Dispatch


@dataclass
class DistinctOutcome:
    relation: Relation
    path: str  # "bmm-bgp" | "bmm-bgp-opt" | "naive"
    mcs_trace: list[str] = field(default_factory=list)


def _own_dvars(gosn: Gosn, sid: int, dvars: frozenset[Variable]) -> frozenset[Variable]:
    master_vars: frozenset[Variable] = frozenset()
    for m in gosn.masters.get(sid, frozenset()):
        master_vars |= gosn.sn_vars(m)
    return (dvars & gosn.sn_vars(sid)) - master_vars


def _bmm_eligible(query: Query, result: EngineResult) -> "str | None":
    if any(isinstance(n, (Union, Filter)) for n in iter_nodes(query.root)):
        return None
    if len(result.disjuncts) != 1:
        return None
    report = result.disjuncts[0].report
    if not (
        report.got_acyclic
        and report.fully_reducible
        and report.supernodes_acyclic
        and report.supernodes_connected
        and report.supernodes_reducible
        and report.connected
    ):
        return None  # pruning only guarantees minimal matrices on this class
    gosn = result.disjuncts[0].gosn
    if len(gosn.supernodes) == 1:
        return "bmm-bgp"
    dvars = frozenset(query.projection)
    if not (dvars & gosn.sn_vars(gosn.abs_id)):
        return None  # distinct variables confined to optional blocks
    covering = {gosn.abs_id}
    for sid in gosn.supernodes:
        if _own_dvars(gosn, sid, dvars):
            covering.add(sid)
            covering |= gosn.masters.get(sid, frozenset())
    for sid in covering:
        if not (dvars & gosn.sn_vars(sid)):
            return None  # a connecting supernode carries no distinct variable
    return "bmm-bgp-opt"


def distinct_eval(
    query: Query,
    store: TripleStore,
    config: "RunConfig | None" = None,
    force_naive: bool = False,
) -> DistinctOutcome:
    """DISTINCT dispatch: matrix-product path for acyclic pruned BGP and
    BGP-OPT queries whose projection reaches the absolute master, naive
    evaluate-then-dedup otherwise. Both paths end with the subsumption-aware
    dedup, so they are interchangeable where both apply."""
    config = config or RunConfig()
    result = run_query(query, store, config)
    naive_relation = best_match(result.relation.project(query.projection))
    path = None if (force_naive or not config.prune) else _bmm_eligible(query, result)
    if path is None:
        return DistinctOutcome(naive_relation, "naive")
    trace = result.disjuncts[0]
    gosn, got = trace.gosn, trace.got
    dvars = frozenset(query.projection)
    if path == "bmm-bgp":
        requirements = {gosn.abs_id: dvars & gosn.sn_vars(gosn.abs_id)}
        universe = {tp.index for tp in got.nodes}
    else:
        covering = {gosn.abs_id}
        requirements = {gosn.abs_id: dvars & gosn.sn_vars(gosn.abs_id)}
        for sid in gosn.topo_order():
            own = _own_dvars(gosn, sid, dvars)
            if sid != gosn.abs_id and own:
                covering.add(sid)
                covering |= gosn.masters.get(sid, frozenset())
                requirements[sid] = own
        universe = {
            tp.index
            for sid in covering
            for tp in gosn.supernodes[sid].patterns
        }
        for sid in covering:
            requirements.setdefault(sid, dvars & gosn.sn_vars(sid))
    mcs = carve_mcs(got, gosn, result.matrices, requirements, universe)
    trace_lines = [f"mcs.carved {mcs.describe()}"]
    if not mcs.connected():
        return DistinctOutcome(naive_relation, "naive")
    mcs = shrink_mcs(mcs, gosn, store.dictionary.n_so)
    trace_lines.extend(f"mcs.step.{i} {snap}" for i, snap in enumerate(mcs.evolution, 1))
    trace_lines.append(f"mcs.shrunk {mcs.describe()}")
    relation = _evaluate_mcs(mcs, gosn, store, query)
    return DistinctOutcome(relation, path, trace_lines)


def _evaluate_mcs(mcs: Mcs, gosn: Gosn, store: TripleStore, query: Query) -> Relation:
    """Join the surviving matrices with the pipelined join, project the
    distinct variables, and dedup with subsumption."""
    order = _mcs_stps(mcs, gosn)
    header = tuple(
        sorted({v for n in mcs.nodes.values() for v in n.vars}, key=lambda v: v.name)
    )
    join = _McsJoin(gosn, mcs, order, store)
    relation = Relation(header)
    d = store.dictionary
    for vmap in join.run():
        relation.rows.append(
            tuple(None if vmap.get(v) is None else d.term_of(vmap[v]) for v in header)
        )
    present = [v for v in query.projection if v in header]
    projected = relation.project(tuple(present))
    if tuple(present) != query.projection:
        idx = {v: i for i, v in enumerate(present)}
        rows = [
            tuple(row[idx[v]] if v in idx else None for v in query.projection)
            for row in projected.rows
        ]
        projected = Relation(query.projection, rows)
    return best_match(projected)


def _mcs_stps(mcs: Mcs, gosn: Gosn) -> list[int]:
    rank = {sid: i for i, sid in enumerate(gosn.topo_order())}
    ordered = sorted(
        mcs.nodes,
        key=lambda nid: (rank[mcs.nodes[nid].sid], mcs.nodes[nid].matrix.count, nid),
    )
    if not ordered:
        return []
    stps = [ordered[0]]
    remaining = ordered[1:]
    while remaining:
        for nid in remaining:
            if any(mcs.edges.get(frozenset((nid, prev))) for prev in stps):
                stps.append(nid)
                remaining.remove(nid)
                break
        else:
            raise AssertionError("covering subgraph lost connectivity")
    return stps


class _McsJoin:
    """Pipelined join over covering-subgraph nodes (original patterns or
    products); optional-block NULL semantics driven by supernode ids."""

    def __init__(self, gosn: Gosn, mcs: Mcs, order, store):
        self.gosn = gosn
        self.mcs = mcs
        self.order = order
        self.store = store

    def run(self):
        yield from self._recurse(0, {}, {})

    def _recurse(self, depth, vmap, status):
        if depth == len(self.order):
            yield dict(vmap)
            return
        nid = self.order[depth]
        if status.get(nid) == SKIPPED:
            yield from self._recurse(depth + 1, vmap, status)
            return
        node = self.mcs.nodes[nid]
        matched = False
        for binding in node.matrix.bindings(vmap, self.store.dictionary):
            matched = True
            added = [v for v in binding if v not in vmap]
            vmap.update(binding)
            yield from self._recurse(depth + 1, vmap, status)
            for v in added:
                del vmap[v]
        if matched:
            return
        if node.sid == self.gosn.abs_id:
            return
        closure = self.gosn.slave_closure(node.sid)
        to_skip = [
            j
            for j in self.order[depth + 1 :]
            if self.mcs.nodes[j].sid in closure and status.get(j) is None
        ]
        nulled = []
        for j in [nid] + to_skip:
            for v in self.mcs.nodes[j].vars:
                if v not in vmap:
                    vmap[v] = None
                    nulled.append(v)
        for j in to_skip:
            status[j] = SKIPPED
        yield from self._recurse(depth + 1, vmap, status)
        for v in nulled:
            del vmap[v]
        for j in to_skip:
            del status[j]
