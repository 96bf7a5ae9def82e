"""Per-query working matrices, one per triple pattern.

A working matrix wraps a (copy of a) stored BitMat with its dimensions
mapped to the pattern's variables: a two-variable pattern is a full S-O or
O-S slice, patterns with one constant collapse to a single indexed row, and
a ground pattern is a 1x1 presence bit. The shared store is never mutated;
semi-joins and load-time masks operate on these copies only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

from . import bitmat
from .algebra import Comparison, TriplePattern, Variable, eval_filter
from .bitmat import BitArray, BitMat, COL_DIM, ROW_DIM, fold, unfold
from .store import Coord, Dictionary, TripleStore
from .terms import Term


class UnsupportedByIndexError(ValueError):
    """Pattern shape the bit-matrix indexes cannot serve (variable
    predicates; the brute-force path still evaluates them)."""


@dataclass
class PatternMatrix:
    pattern: "TriplePattern | None"
    row_var: "Variable | None"
    col_var: "Variable | None"
    bm: BitMat
    sid: int = 0  # supernode id, filled by the executor

    @property
    def count(self) -> int:
        return self.bm.triple_count

    def vars(self) -> tuple[Variable, ...]:
        if self.row_var is not None and self.col_var is not None and self.row_var != self.col_var:
            return (self.row_var, self.col_var)
        if self.row_var is not None:
            return (self.row_var,)
        if self.col_var is not None:
            return (self.col_var,)
        return ()

    @property
    def label(self) -> str:
        return self.pattern.label if self.pattern is not None else "T?"

    # -- dimension plumbing ---------------------------------------------------

    def dim_of(self, var: Variable) -> str:
        """'row' or 'column'; the row dimension wins for repeated variables."""
        if var == self.row_var:
            return ROW_DIM
        if var == self.col_var:
            return COL_DIM
        raise KeyError(f"{var} not bound by {self.label}")

    def space_of(self, var: Variable) -> str:
        return self.bm.row_space if self.dim_of(var) == ROW_DIM else self.bm.col_space

    def fold_var(self, var: Variable) -> BitArray:
        return fold(self.bm, self.dim_of(var))

    def unfold_var(self, var: Variable, mask: BitArray, so_count: int) -> None:
        unfold(self.bm, mask, self.dim_of(var), so_count)

    # -- enumeration ----------------------------------------------------------

    def bindings(self, bound: dict[Variable, "Coord | None"], dictionary: Dictionary) -> Iterator[dict[Variable, Coord]]:
        """Enumerate extensions consistent with ``bound``. A NULL value for
        one of this pattern's variables matches nothing."""
        n_so = dictionary.n_so
        rv, cv = self.row_var, self.col_var
        diagonal = rv is not None and rv == cv

        def coord_on(var, space):
            if var is None:
                return 1 if space == bitmat.UNIT else None
            if var in bound:
                c = bound[var]
                if c is None:
                    return 0  # NULL: no triple can match
                on = c.on_dim(space, n_so)
                return 0 if on is None else on
            return None

        r = coord_on(rv, self.bm.row_space)
        c = coord_on(cv, self.bm.col_space) if not diagonal else r
        if r == 0 or c == 0:
            return
        if self.bm.row_space == bitmat.UNIT:
            r = 1
        if r is not None and c is not None:
            if self.bm.test(r, c):
                yield {}
            return
        if r is not None:
            mask = self.bm.row_bits(r)
            while mask:
                low = mask & -mask
                pos = low.bit_length()
                mask ^= low
                yield {cv: dictionary.canon(self.bm.col_space, pos)}
            return
        if c is not None:
            col_bit = 1 << (c - 1)
            for ridx in sorted(self.bm.rows):
                if self.bm.row_bits(ridx) & col_bit:
                    yield {rv: dictionary.canon(self.bm.row_space, ridx)}
            return
        for ridx in sorted(self.bm.rows):
            row_coord = dictionary.canon(self.bm.row_space, ridx)
            mask = self.bm.row_bits(ridx)
            while mask:
                low = mask & -mask
                pos = low.bit_length()
                mask ^= low
                if diagonal:
                    yield {rv: row_coord}
                else:
                    out = {cv: dictionary.canon(self.bm.col_space, pos)}
                    if rv is not None:
                        out[rv] = row_coord
                    yield out

    def triple_bindings(self, dictionary: Dictionary) -> list[dict[Variable, Term]]:
        """Term-level bindings of every surviving triple (for minimality
        checks and diagnostics)."""
        out = []
        for binding in self.bindings({}, dictionary):
            out.append({v: dictionary.term_of(c) for v, c in binding.items()})
        return out


def select_pattern_matrix(
    store: TripleStore,
    tp: TriplePattern,
    first_join_var: "Variable | None" = None,
) -> PatternMatrix:
    """Load the working matrix for a pattern.

    Two fixed positions load one row of the P-S (fixed object) or P-O (fixed
    subject) family; a fixed predicate with two variables loads the S-O or
    O-S slice, oriented so the variable that joins first sits on the row
    dimension.
    """
    d = store.dictionary
    if isinstance(tp.p, Variable):
        raise UnsupportedByIndexError(
            f"{tp.label} has a variable predicate; joins on the predicate "
            "dimension are not index-supported"
        )
    pid = d.predicate_id(tp.p)
    s_var = isinstance(tp.s, Variable)
    o_var = isinstance(tp.o, Variable)

    def empty(row_var, col_var, n_cols, col_space):
        bm = BitMat("ROW", 0, bitmat.UNIT, col_space, 1, max(n_cols, 1))
        return PatternMatrix(tp, row_var, col_var, bm)

    if s_var and o_var:
        if tp.s == tp.o:
            # Repeated variable: diagonal of the S-O slice, shared ids only.
            pm = PatternMatrix(tp, tp.s, tp.o, _so_slice(store, pid, "SO"))
            diag = BitArray(bitmat.S, d.n_s, (1 << d.n_so) - 1)
            pm.unfold_var(tp.s, diag, d.n_so)
            for r in list(pm.bm.rows):
                pm.bm.set_row_bits(r, pm.bm.row_bits(r) & (1 << (r - 1)))
            return pm
        kind = "SO" if first_join_var is None or first_join_var == tp.s else "OS"
        bm = _so_slice(store, pid, kind)
        if kind == "SO":
            return PatternMatrix(tp, tp.s, tp.o, bm)
        return PatternMatrix(tp, tp.o, tp.s, bm)
    if s_var:
        # (?v :p :o) -> predicate row of the P-S slice of :o
        oid = None if isinstance(tp.o, Variable) else _object_id(d, tp.o)
        if pid is None or oid is None:
            return empty(None, tp.s, d.n_s, bitmat.S)
        source = store.bitmat("PS", oid)
        row = source.row_bits(pid)
        bm = BitMat("ROW", oid, bitmat.UNIT, bitmat.S, 1, d.n_s)
        bm.set_row_bits(1, row)
        return PatternMatrix(tp, None, tp.s, bm)
    if o_var:
        # (:s :p ?v) -> predicate row of the P-O slice of :s
        sid = _subject_id(d, tp.s)
        if pid is None or sid is None:
            return empty(None, tp.o, d.n_o, bitmat.O)
        source = store.bitmat("PO", sid)
        row = source.row_bits(pid)
        bm = BitMat("ROW", sid, bitmat.UNIT, bitmat.O, 1, d.n_o)
        bm.set_row_bits(1, row)
        return PatternMatrix(tp, None, tp.o, bm)
    # Ground pattern: presence bit.
    sid = _subject_id(d, tp.s)
    oid = _object_id(d, tp.o)
    bm = BitMat("ROW", 0, bitmat.UNIT, bitmat.UNIT, 1, 1)
    if pid is not None and sid is not None and oid is not None:
        if (sid, pid, oid) in store.id_triples:
            bm.set_row_bits(1, 1)
    return PatternMatrix(tp, None, None, bm)


def _so_slice(store: TripleStore, pid: "int | None", kind: str) -> BitMat:
    d = store.dictionary
    if pid is None:
        spaces = (bitmat.S, bitmat.O) if kind == "SO" else (bitmat.O, bitmat.S)
        dims = (d.n_s, d.n_o) if kind == "SO" else (d.n_o, d.n_s)
        return BitMat(kind, 0, spaces[0], spaces[1], max(dims[0], 1), max(dims[1], 1))
    return store.bitmat(kind, pid).copy()


def _subject_id(d: Dictionary, term: Term) -> "int | None":
    return d.subject_id(term)


def _object_id(d: Dictionary, term: Term) -> "int | None":
    return d.object_id(term)


def apply_loadtime_conjunct(pm: PatternMatrix, conjunct: Comparison, var: Variable, dictionary: Dictionary) -> None:
    """Mask one dimension by evaluating a single-variable comparison over the
    candidate terms of that dimension."""
    space = pm.space_of(var)
    width = pm.bm.n_rows if pm.dim_of(var) == ROW_DIM else pm.bm.n_cols
    mask = 0
    current = pm.fold_var(var)
    for pos in current.positions():
        term = dictionary.term_of(dictionary.canon(space, pos))
        if eval_filter(conjunct, lambda v, t=term: t) is True:
            mask |= 1 << (pos - 1)
    pm.unfold_var(var, BitArray(space, width, mask), dictionary.n_so)
