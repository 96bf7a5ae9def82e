"""Semi-join pruning of the per-pattern working matrices.

Three regimes, picked from the structure report: fully acyclic queries get a
bottom-up/top-down pass per supernode (masters first, so slaves prune
against already-pruned masters); cycles confined to the absolute master get
a greedy pass there and bottom-up/top-down passes for the slaves; anything
else gets a single greedy pass honoring the master-slave hierarchy. A
bottom-up pass repeatedly picks the cheapest single-equivalence-class leaf,
transfers master constraints into it first, then semi-joins its cheapest
neighbor against it; the top-down pass replays the reverse, minus the steps
that would let a slave shrink its master.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .algebra import TriplePattern, Variable
from .bitmat import BitArray, intersect_arrays
from .patmat import PatternMatrix, apply_loadtime_conjunct, select_pattern_matrix
from .rewriter import ScopedConjunct, is_loadtime
from .store import TripleStore
from .structure import Gosn, Got, StructureReport, count_node_classes, dominating_neighbors

GREEDY_ALL = "greedy"
GREEDY_ABS = "greedy-abs+per-supernode"
PER_SUPERNODE = "per-supernode"


@dataclass(frozen=True)
class SemiJoinStep:
    target: int  # pattern index being reduced
    source: int
    join_vars: frozenset[Variable]
    transfer: bool = False  # master-constraint transfer into a slave

    def describe(self) -> str:
        vars_text = ",".join(sorted(str(v) for v in self.join_vars))
        suffix = "  (master transfer)" if self.transfer else ""
        return f"T{self.target} ⋉ T{self.source} over {{{vars_text}}}{suffix}"


@dataclass
class PruneSchedule:
    regime: str
    sn_order: list[int]
    greedy: list[SemiJoinStep] = field(default_factory=list)
    per_sn: list[tuple[int, list[SemiJoinStep], list[SemiJoinStep]]] = field(default_factory=list)

    def all_steps(self) -> list[SemiJoinStep]:
        steps = list(self.greedy)
        for _, bu, td in self.per_sn:
            steps.extend(bu)
            steps.extend(td)
        return steps


def order_supernodes(gosn: Gosn) -> list[int]:
    return gosn.topo_order()


def pick_regime(report: StructureReport) -> str:
    if report.got_acyclic and report.supernodes_acyclic and report.supernodes_connected:
        return PER_SUPERNODE
    if (
        report.slaves_acyclic
        and report.one_equiv_class_per_master_slave_pair
        and report.supernodes_connected
    ):
        return GREEDY_ABS
    return GREEDY_ALL


def semi_join(
    target: PatternMatrix,
    source: PatternMatrix,
    join_vars: frozenset[Variable],
    so_count: int,
) -> None:
    """Keep only target triples whose join-variable bindings occur in the
    source: fold both sides per variable, AND the masks, unfold the target.
    Shared variable pairs additionally require the pair itself to exist in
    the source."""
    for var in sorted(join_vars, key=lambda v: v.name):
        beta: BitArray = target.fold_var(var)
        beta = intersect_arrays(beta, source.fold_var(var), so_count)
        target.unfold_var(var, beta, so_count)
    if len(join_vars) >= 2:
        _pair_semi_join(target, source, tuple(sorted(join_vars, key=lambda v: v.name)), so_count)


def _pair_semi_join(
    target: PatternMatrix,
    source: PatternMatrix,
    pair: tuple[Variable, ...],
    n_so: int,
) -> None:
    # Both patterns bind both variables on S/O dimensions; keep target cells
    # whose (a, b) coordinate pair appears in the source.
    a, b = pair[0], pair[1]
    allowed: set[tuple] = set()
    src_rv, src_cv = source.row_var, source.col_var

    def canonical(space: str, idx: int):
        return ("so", idx) if idx <= n_so else (space, idx)

    for r, c in source.bm.cells():
        bind = {src_rv: canonical(source.bm.row_space, r), src_cv: canonical(source.bm.col_space, c)}
        allowed.add((bind[a], bind[b]))
    for r, c in list(target.bm.cells()):
        bind = {target.row_var: canonical(target.bm.row_space, r), target.col_var: canonical(target.bm.col_space, c)}
        if (bind[a], bind[b]) not in allowed:
            target.bm.set_row_bits(r, target.bm.row_bits(r) & ~(1 << (c - 1)))


@dataclass
class PruneContext:
    store: TripleStore
    gosn: Gosn
    got: Got
    report: StructureReport
    matrices: dict[int, PatternMatrix]

    @property
    def n_so(self) -> int:
        return self.store.dictionary.n_so

    def count(self, idx: int) -> int:
        return self.matrices[idx].count

    def run_step(self, step: SemiJoinStep) -> None:
        semi_join(
            self.matrices[step.target],
            self.matrices[step.source],
            step.join_vars,
            self.n_so,
        )


def load_matrices(
    store: TripleStore,
    gosn: Gosn,
    got: Got,
    scoped_conjuncts: list[ScopedConjunct],
    active_prune: bool = True,
    loadtime_filters: bool = True,
) -> tuple[dict[int, PatternMatrix], set[int]]:
    """Load working matrices in master-first order.

    While loading, apply eligible single-variable filter conjuncts as masks
    and actively prune with the bindings of already-loaded patterns that are
    masters or peers of the loading one. Returns the matrices and the ids of
    conjuncts consumed at load time.
    """
    sn_rank = {sid: i for i, sid in enumerate(gosn.topo_order())}
    patterns = sorted(
        (tp for sn in gosn.supernodes.values() for tp in sn.patterns),
        key=lambda tp: (sn_rank[gosn.sn_of_pattern[tp.index]], tp.index),
    )
    scope_patterns = {
        id(sc): {tp.index for tp in _scope_patterns(sc)} for sc in scoped_conjuncts
    }
    matrices: dict[int, PatternMatrix] = {}
    applied: set[int] = set()
    for tp in patterns:
        first_join = _first_join_var(tp, got)
        pm = select_pattern_matrix(store, tp, first_join)
        pm.sid = gosn.sn_of_pattern[tp.index]
        if loadtime_filters:
            for sc in scoped_conjuncts:
                if not is_loadtime(sc.conjunct):
                    continue
                (var,) = tuple(sc.vars)
                if var in tp.vars() and tp.index in scope_patterns[id(sc)]:
                    apply_loadtime_conjunct(pm, sc.conjunct, var, store.dictionary)
                    applied.add(id(sc.conjunct))
        if active_prune:
            my_sid = pm.sid
            for other, label in got.incident(tp.index):
                if other not in matrices:
                    continue
                other_sid = gosn.sn_of_pattern[other]
                is_peer = other_sid == my_sid
                is_master = other_sid in gosn.masters.get(my_sid, frozenset()) or (
                    other_sid,
                    my_sid,
                ) in gosn.uni_edges
                if is_peer or is_master:
                    foldable = [v for v in label if _on_so_dim(pm, v) and _on_so_dim(matrices[other], v)]
                    if foldable:
                        semi_join(pm, matrices[other], frozenset(foldable), store.dictionary.n_so)
        matrices[tp.index] = pm
    return matrices, applied


def _scope_patterns(sc: ScopedConjunct):
    from .algebra import node_patterns

    return node_patterns(sc.scope)


def _on_so_dim(pm: PatternMatrix, var: Variable) -> bool:
    try:
        pm.dim_of(var)
        return True
    except KeyError:
        return False


def _first_join_var(tp: TriplePattern, got: Got) -> "Variable | None":
    incident = got.incident(tp.index)
    if not incident:
        return None
    # Prefer the variable joined through the cheapest-indexed neighbor.
    for _, label in incident:
        for var in sorted(label, key=lambda v: v.name):
            if var in (tp.s, tp.o):
                return var
    return None


def plan_supernode_pass(
    ctx: PruneContext,
    sid: int,
    execute: bool,
    count_of: "Callable[[int], int] | None" = None,
) -> tuple[list[SemiJoinStep], list[SemiJoinStep]]:
    """One bottom-up + top-down pass over the patterns of a supernode.

    When ``execute`` is set each step runs as soon as it is planned, so later
    cost decisions see refreshed counts.
    """
    gosn, got = ctx.gosn, ctx.got
    count_of = count_of or ctx.count
    sn = gosn.supernodes[sid]
    alive = {tp.index for tp in sn.patterns}
    sn_ids = set(alive)
    is_slave = sid != gosn.abs_id
    master_sids = gosn.masters.get(sid, frozenset())
    transferred: set[tuple[int, int]] = set()
    order_bu: list[SemiJoinStep] = []

    def emit(step: SemiJoinStep) -> None:
        order_bu.append(step)
        if execute:
            ctx.run_step(step)

    def emit_transfers(idx: int) -> None:
        if not is_slave:
            return
        for other, label in got.incident(idx):
            other_sid = gosn.sn_of_pattern[other]
            if other_sid in master_sids and (idx, other) not in transferred:
                transferred.add((idx, other))
                emit(SemiJoinStep(idx, other, label, transfer=True))

    subgraph = got.subgraph(sn_ids)
    while alive:
        # Ears first: a leaf with a neighbor covering its whole live join
        # surface keeps the pass a genuine full reducer. A one-class leaf
        # without such a witness (possible with multi-variable labels) still
        # gets reduced, just without the minimality guarantee.
        ears = [
            idx
            for idx in alive
            if not subgraph.incident(idx, alive) or dominating_neighbors(subgraph, idx, alive)
        ]
        if ears:
            t_i = min(ears, key=lambda idx: (count_of(idx), idx))
            partners = dominating_neighbors(subgraph, t_i, alive)
        else:
            leaves = [idx for idx in alive if count_node_classes(subgraph, idx, alive) <= 1]
            if not leaves:
                leaves = sorted(alive)  # cyclic remainder: stay sound
            t_i = min(leaves, key=lambda idx: (count_of(idx), idx))
            partners = [n for n in subgraph.neighbors(t_i, alive) if n != t_i]
        emit_transfers(t_i)
        if partners:
            t_j = min(partners, key=lambda idx: (count_of(idx), idx))
            emit_transfers(t_j)
            emit(SemiJoinStep(t_j, t_i, got.label(t_j, t_i)))
        alive.remove(t_i)

    order_td: list[SemiJoinStep] = []
    for step in reversed(order_bu):
        if step.transfer:
            continue  # reversing a transfer would let a slave shrink a master
        flipped = SemiJoinStep(step.source, step.target, step.join_vars)
        order_td.append(flipped)
        if execute:
            ctx.run_step(flipped)
    return order_bu, order_td


def plan_greedy(
    ctx: PruneContext,
    pattern_ids: list[int],
    execute: bool,
    count_of: "Callable[[int], int] | None" = None,
) -> list[SemiJoinStep]:
    """Cheapest-first pass constrained by the master-slave hierarchy; every
    pattern is semi-joined against each already-processed neighbor once."""
    gosn, got = ctx.gosn, ctx.got
    count_of = count_of or ctx.count
    sn_rank = {sid: i for i, sid in enumerate(gosn.topo_order())}
    remaining = set(pattern_ids)
    processed: list[int] = []
    steps: list[SemiJoinStep] = []
    while remaining:
        nxt = min(
            remaining,
            key=lambda idx: (sn_rank[gosn.sn_of_pattern[idx]], count_of(idx), idx),
        )
        remaining.remove(nxt)
        for other, label in got.incident(nxt):
            if other in processed:
                step = SemiJoinStep(
                    nxt,
                    other,
                    label,
                    transfer=gosn.sn_of_pattern[other] != gosn.sn_of_pattern[nxt],
                )
                steps.append(step)
                if execute:
                    ctx.run_step(step)
        processed.append(nxt)
    return steps


def build_schedule(
    gosn: Gosn,
    got: Got,
    report: StructureReport,
    stats: dict[int, int],
) -> PruneSchedule:
    """Plan without executing, using the supplied per-pattern triple counts.
    The executed schedule can differ in tie order because counts refresh as
    semi-joins run."""
    ctx = PruneContext(None, gosn, got, report, {})  # type: ignore[arg-type]
    return _drive(ctx, execute=False, count_of=lambda idx: stats[idx])


def prune_triples(ctx: PruneContext) -> PruneSchedule:
    """Execute pruning against the working matrices, interleaving planning
    with execution so costs refresh after every semi-join."""
    return _drive(ctx, execute=True, count_of=None)


def _drive(ctx: PruneContext, execute: bool, count_of) -> PruneSchedule:
    gosn = ctx.gosn
    regime = pick_regime(ctx.report)
    sn_order = order_supernodes(gosn)
    schedule = PruneSchedule(regime, sn_order)
    if regime == GREEDY_ALL:
        all_ids = [tp.index for sn in gosn.supernodes.values() for tp in sn.patterns]
        schedule.greedy = plan_greedy(ctx, sorted(all_ids), execute, count_of)
        return schedule
    remaining = list(sn_order)
    if regime == GREEDY_ABS:
        abs_ids = [tp.index for tp in gosn.supernodes[gosn.abs_id].patterns]
        schedule.greedy = plan_greedy(ctx, sorted(abs_ids), execute, count_of)
        remaining = [sid for sid in remaining if sid != gosn.abs_id]
    for sid in remaining:
        bu, td = plan_supernode_pass(ctx, sid, execute, count_of)
        schedule.per_sn.append((sid, bu, td))
    return schedule
