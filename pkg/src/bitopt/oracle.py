"""Brute-force reference evaluator.

Evaluates the algebra tree in its original order with textbook semantics:
BGPs by nested loops over the triple list, left-outer joins extending where
compatible and NULL-padding otherwise, union-all, null-compatible joins,
and three-valued filters where a failing conjunct over optional-only
variables nullifies that optional block instead of deleting the row. It
shares no code with the engine's join path, so agreement between the two is
evidence rather than tautology.
"""

from __future__ import annotations

from dataclasses import dataclass

from .algebra import (
    Bgp,
    Filter,
    Join,
    LeftJoin,
    PatternNode,
    Query,
    TriplePattern,
    Union,
    Variable,
    eval_filter,
    filter_vars,
    master_region_vars,
    node_vars,
    top_conjuncts,
)
from .terms import Term

ROW_CAP = 10_000


class OracleCapacityError(RuntimeError):
    def __init__(self, size: int):
        super().__init__(f"oracle intermediate relation exceeded {ROW_CAP} rows ({size})")


@dataclass
class ORelation:
    header: tuple[Variable, ...]
    rows: list[dict[Variable, "Term | None"]]

    def check_cap(self) -> "ORelation":
        if len(self.rows) > ROW_CAP:
            raise OracleCapacityError(len(self.rows))
        return self


def _match_pattern(tp: TriplePattern, triple, binding) -> "dict | None":
    out = dict(binding)
    for pos, value in zip((tp.s, tp.p, tp.o), triple):
        if isinstance(pos, Variable):
            if pos in out and out[pos] is not None:
                if out[pos] != value:
                    return None
            else:
                out[pos] = value
        elif pos != value:
            return None
    return out


def _eval_bgp(node: Bgp, triples) -> ORelation:
    header = tuple(sorted(node_vars(node), key=lambda v: v.name))
    rows: list[dict] = [{}]
    for tp in node.patterns:
        nxt = []
        for binding in rows:
            for triple in triples:
                extended = _match_pattern(tp, triple, binding)
                if extended is not None:
                    nxt.append(extended)
        rows = nxt
        if len(rows) > ROW_CAP:
            raise OracleCapacityError(len(rows))
    return ORelation(header, rows)


def _compatible(a: dict, b: dict) -> "dict | None":
    # Null-compatible merge: a NULL on either side defers to the other.
    out = dict(a)
    for key, value in b.items():
        if key in out and out[key] is not None:
            if value is not None and out[key] != value:
                return None
        else:
            if key not in out or value is not None:
                out[key] = value
    return out


def _pad(row: dict, header) -> dict:
    out = {v: None for v in header}
    out.update(row)
    return out


def _eval_node(node: PatternNode, triples) -> ORelation:
    if isinstance(node, Bgp):
        return _eval_bgp(node, triples)
    if isinstance(node, Filter):
        return _eval_filter_node(node, triples)
    if isinstance(node, Union):
        left = _eval_node(node.left, triples)
        right = _eval_node(node.right, triples)
        header = tuple(sorted(set(left.header) | set(right.header), key=lambda v: v.name))
        rows = [_pad(r, header) for r in left.rows] + [_pad(r, header) for r in right.rows]
        return ORelation(header, rows).check_cap()
    left = _eval_node(node.left, triples)
    right = _eval_node(node.right, triples)
    header = tuple(sorted(set(left.header) | set(right.header), key=lambda v: v.name))
    rows = []
    if isinstance(node, Join):
        for a in left.rows:
            for b in right.rows:
                merged = _compatible(a, b)
                if merged is not None:
                    rows.append(_pad(merged, header))
    else:  # LeftJoin
        for a in left.rows:
            extensions = []
            for b in right.rows:
                merged = _compatible(a, b)
                if merged is not None:
                    extensions.append(_pad(merged, header))
            if extensions:
                rows.extend(extensions)
            else:
                rows.append(_pad(a, header))
    return ORelation(header, rows).check_cap()


def _optional_blocks_of(node: PatternNode) -> list[PatternNode]:
    if isinstance(node, Bgp):
        return []
    if isinstance(node, Filter):
        return _optional_blocks_of(node.inner)
    if isinstance(node, Union):
        return []
    out = _optional_blocks_of(node.left)
    if isinstance(node, LeftJoin):
        out.append(node.right)
    else:
        out.extend(_optional_blocks_of(node.right))
    return out


def _null_block_vars(scope: PatternNode, var: Variable) -> frozenset[Variable]:
    """Variables to null when a filter conjunct fails on an optional-only
    variable: the outermost optional block owning it, minus everything bound
    elsewhere in the scope."""
    for block in _optional_blocks_of(scope):
        if var in node_vars(block):
            if var in master_region_vars(block):
                target = block
            else:
                inner = _null_block_vars(block, var)
                return inner
            outside: frozenset[Variable] = frozenset()

            def collect(n: PatternNode) -> frozenset[Variable]:
                if n is target:
                    return frozenset()
                if isinstance(n, Bgp):
                    return node_vars(n)
                if isinstance(n, Filter):
                    return collect(n.inner)
                return collect(n.left) | collect(n.right)

            outside = collect(scope)
            return node_vars(target) - outside
    return frozenset()


def _eval_filter_node(node: Filter, triples) -> ORelation:
    inner = _eval_node(node.inner, triples)
    spine = master_region_vars(node.inner)
    out_rows = []
    for row in inner.rows:
        current = dict(row)
        keep = True
        for conjunct in top_conjuncts(node.expr):
            verdict = eval_filter(conjunct, lambda v: current.get(v))
            if verdict is True:
                continue
            optional_vars = [v for v in filter_vars(conjunct) if v not in spine]
            if not optional_vars:
                keep = False  # conjunct over spine bindings only: row dies
                break
            for v in optional_vars:
                for nv in _null_block_vars(node.inner, v):
                    current[nv] = None
        if keep:
            out_rows.append(current)
    return ORelation(inner.header, out_rows)


def oracle_eval(query: "Query | PatternNode", triples: list[tuple[Term, Term, Term]]) -> ORelation:
    """Full-variable relation for the query (projection left to the caller)."""
    node = query.root if isinstance(query, Query) else query
    result = _eval_node(node, triples)
    header = tuple(sorted(node_vars(node), key=lambda v: v.name))
    return ORelation(header, [_pad(r, header) for r in result.rows])
