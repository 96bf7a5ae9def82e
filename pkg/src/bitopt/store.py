"""Dictionary-encoded triple storage behind the four bit-matrix index families.

Terms are mapped to dense integer coordinates. Terms occurring both as
subject and object get ids 1..n_so shared between the two dimensions;
subject-only terms continue at n_so+1..n_s, object-only terms independently
at n_so+1..n_o, predicates live in their own 1..n_p space. The conceptual
subject x predicate x object bit cube is never materialized; 2D slices
(S-O and O-S per predicate, P-S per object, P-O per subject) are built on
first use and cached.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass
from typing import Iterable, Iterator

from . import bitmat
from .bitmat import BitMat, CompressedRow, bitmat_from_cells, row_from_mask
from .ntriples import parse_ntriples
from .terms import Iri, Literal, Term, term_sort_key

SO_CLASS = "so"
S_CLASS = "s"
O_CLASS = "o"
P_CLASS = "p"


class StoreError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class Coord:
    """Canonical term coordinate: id plus the class that disambiguates it.

    Ids above n_so are reused between the subject-only and object-only
    ranges, so the class is part of the identity.
    """

    cls: str
    idx: int

    def on_subject_dim(self, n_so: int) -> "int | None":
        if self.cls == SO_CLASS or self.cls == S_CLASS:
            return self.idx
        return None

    def on_object_dim(self, n_so: int) -> "int | None":
        if self.cls == SO_CLASS or self.cls == O_CLASS:
            return self.idx
        return None

    def on_dim(self, space: str, n_so: int) -> "int | None":
        if space == bitmat.S:
            return self.on_subject_dim(n_so)
        if space == bitmat.O:
            return self.on_object_dim(n_so)
        if space == bitmat.P:
            return self.idx if self.cls == P_CLASS else None
        return None


class Dictionary:
    """Bidirectional term/id mapping honoring the shared S/O space."""

    def __init__(self):
        self._sub_ids: dict[Term, int] = {}
        self._obj_ids: dict[Term, int] = {}
        self._pred_ids: dict[Term, int] = {}
        self._sub_terms: dict[int, Term] = {}
        self._obj_terms: dict[int, Term] = {}
        self._pred_terms: dict[int, Term] = {}
        self.n_so = 0

    @classmethod
    def build(cls, triples: Iterable[tuple[Term, Term, Term]]) -> "Dictionary":
        # Two passes: classify terms first, then assign ids in first-appearance
        # order so the shared range 1..n_so comes out dense.
        triples = list(triples)
        subjects: list[Term] = []
        objects: list[Term] = []
        preds: list[Term] = []
        seen_s: set[Term] = set()
        seen_o: set[Term] = set()
        seen_p: set[Term] = set()
        for s, p, o in triples:
            if s not in seen_s:
                seen_s.add(s)
                subjects.append(s)
            if o not in seen_o:
                seen_o.add(o)
                objects.append(o)
            if p not in seen_p:
                seen_p.add(p)
                preds.append(p)
        d = cls()
        shared = seen_s & seen_o
        d.n_so = len(shared)
        next_id = 1
        for term in subjects:  # shared terms in first-appearance-as-subject order
            if term in shared:
                d._sub_ids[term] = d._obj_ids[term] = next_id
                d._sub_terms[next_id] = d._obj_terms[next_id] = term
                next_id += 1
        nid = d.n_so + 1
        for term in subjects:
            if term not in shared:
                d._sub_ids[term] = nid
                d._sub_terms[nid] = term
                nid += 1
        nid = d.n_so + 1
        for term in objects:
            if term not in shared:
                d._obj_ids[term] = nid
                d._obj_terms[nid] = term
                nid += 1
        for i, term in enumerate(preds, start=1):
            d._pred_ids[term] = i
            d._pred_terms[i] = term
        return d

    # -- sizes ---------------------------------------------------------------

    @property
    def n_s(self) -> int:
        return len(self._sub_ids)

    @property
    def n_o(self) -> int:
        return len(self._obj_ids)

    @property
    def n_p(self) -> int:
        return len(self._pred_ids)

    # -- lookups -------------------------------------------------------------

    def subject_id(self, term: Term) -> "int | None":
        return self._sub_ids.get(term)

    def object_id(self, term: Term) -> "int | None":
        return self._obj_ids.get(term)

    def predicate_id(self, term: Term) -> "int | None":
        return self._pred_ids.get(term)

    def subject_term(self, idx: int) -> Term:
        return self._sub_terms[idx]

    def object_term(self, idx: int) -> Term:
        return self._obj_terms[idx]

    def predicate_term(self, idx: int) -> Term:
        return self._pred_terms[idx]

    def coord(self, term: Term) -> "Coord | None":
        """Canonical coordinate of a term on the S/O dimensions, if any."""
        sid = self._sub_ids.get(term)
        if sid is not None:
            return Coord(SO_CLASS if sid <= self.n_so else S_CLASS, sid)
        oid = self._obj_ids.get(term)
        if oid is not None:
            return Coord(O_CLASS, oid)
        return None

    def canon(self, space: str, idx: int) -> Coord:
        if space == bitmat.S:
            return Coord(SO_CLASS if idx <= self.n_so else S_CLASS, idx)
        if space == bitmat.O:
            return Coord(SO_CLASS if idx <= self.n_so else O_CLASS, idx)
        if space == bitmat.P:
            return Coord(P_CLASS, idx)
        raise StoreError(f"no canonical coordinate in space {space!r}")

    def term_of(self, coord: Coord) -> Term:
        if coord.cls == P_CLASS:
            return self._pred_terms[coord.idx]
        if coord.cls == O_CLASS:
            return self._obj_terms[coord.idx]
        return self._sub_terms[coord.idx]

    def iter_entries(self) -> Iterator[tuple[int, str, Term]]:
        for idx in sorted(self._sub_terms):
            cls = SO_CLASS if idx <= self.n_so else S_CLASS
            yield idx, cls, self._sub_terms[idx]
        for idx in sorted(self._obj_terms):
            if idx > self.n_so:
                yield idx, O_CLASS, self._obj_terms[idx]
        for idx in sorted(self._pred_terms):
            yield idx, P_CLASS, self._pred_terms[idx]


KIND_CODES = {"SO": 0, "OS": 1, "PS": 2, "PO": 3}
KIND_NAMES = {v: k for k, v in KIND_CODES.items()}


class TripleStore:
    """Immutable-after-load triple store; any number of concurrent readers."""

    def __init__(self, dictionary: Dictionary, id_triples: set[tuple[int, int, int]]):
        self.dictionary = dictionary
        self.id_triples = id_triples  # (subject id, predicate id, object id)
        self._cache: dict[tuple[str, int], BitMat] = {}

    @classmethod
    def from_ntriples(cls, source) -> "TripleStore":
        term_triples = list(parse_ntriples(source))
        d = Dictionary.build(term_triples)
        ids = {
            (d.subject_id(s), d.predicate_id(p), d.object_id(o))
            for s, p, o in term_triples
        }
        return cls(d, ids)

    @property
    def triple_count(self) -> int:
        return len(self.id_triples)

    def term_triples(self) -> list[tuple[Term, Term, Term]]:
        d = self.dictionary
        out = [
            (d.subject_term(s), d.predicate_term(p), d.object_term(o))
            for s, p, o in self.id_triples
        ]
        out.sort(key=lambda t: tuple(term_sort_key(x) for x in t))
        return out

    # -- index families -------------------------------------------------------

    def bitmat(self, kind: str, slice_key: int) -> BitMat:
        """Materialize (or fetch) the shared index slice. Callers must copy
        before mutating."""
        key = (kind, slice_key)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        d = self.dictionary
        if kind == "SO":
            cells = [(s, o) for s, p, o in self.id_triples if p == slice_key]
            bm = bitmat_from_cells("SO", slice_key, bitmat.S, bitmat.O, d.n_s, d.n_o, cells)
        elif kind == "OS":
            bm = bitmat.transpose(self.bitmat("SO", slice_key))
            bm.kind, bm.slice_key = "OS", slice_key
        elif kind == "PS":
            cells = [(p, s) for s, p, o in self.id_triples if o == slice_key]
            bm = bitmat_from_cells("PS", slice_key, bitmat.P, bitmat.S, d.n_p, d.n_s, cells)
        elif kind == "PO":
            cells = [(p, o) for s, p, o in self.id_triples if s == slice_key]
            bm = bitmat_from_cells("PO", slice_key, bitmat.P, bitmat.O, d.n_p, d.n_o, cells)
        else:
            raise StoreError(f"unknown BitMat kind {kind!r}")
        self._cache[key] = bm
        return bm

    def materialized(self) -> list[tuple[str, int]]:
        return sorted(self._cache)

    # -- persistence -----------------------------------------------------------

    def save(self, directory: str) -> list[str]:
        """Write dict.tsv plus one file per S-O BitMat; returns file names."""
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "dict.tsv"), "w", encoding="utf-8") as fh:
            for idx, cls, term in self.dictionary.iter_entries():
                fh.write(f"{idx}\t{cls}\t{term.n3()}\n")
        names = []
        for pid in sorted(self.dictionary._pred_terms):
            bm = self.bitmat("SO", pid)
            name = f"bm_so_{pid}.bin"
            _write_bitmat(os.path.join(directory, name), bm)
            names.append(name)
        with open(os.path.join(directory, "manifest.txt"), "w", encoding="utf-8") as fh:
            fh.write("\n".join(names) + ("\n" if names else ""))
        return names

    @classmethod
    def open(cls, directory: str) -> "TripleStore":
        dict_path = os.path.join(directory, "dict.tsv")
        manifest_path = os.path.join(directory, "manifest.txt")
        if not os.path.isfile(dict_path):
            raise StoreError(f"no store at {directory} (missing dict.tsv)")
        d = Dictionary()
        with open(dict_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                idx_s, tag, rendered = line.split("\t", 2)
                idx = int(idx_s)
                term = _parse_rendered_term(rendered)
                if tag == SO_CLASS:
                    d._sub_ids[term] = d._obj_ids[term] = idx
                    d._sub_terms[idx] = d._obj_terms[idx] = term
                    d.n_so = max(d.n_so, idx)
                elif tag == S_CLASS:
                    d._sub_ids[term] = idx
                    d._sub_terms[idx] = term
                elif tag == O_CLASS:
                    d._obj_ids[term] = idx
                    d._obj_terms[idx] = term
                elif tag == P_CLASS:
                    d._pred_ids[term] = idx
                    d._pred_terms[idx] = term
                else:
                    raise StoreError(f"unknown dictionary class {tag!r}")
        triples: set[tuple[int, int, int]] = set()
        store = cls(d, triples)
        if os.path.isfile(manifest_path):
            with open(manifest_path, encoding="utf-8") as fh:
                names = [ln.strip() for ln in fh if ln.strip()]
        else:
            names = []
        for name in names:
            bm = _read_bitmat(os.path.join(directory, name))
            store._cache[(bm.kind, bm.slice_key)] = bm
            if bm.kind != "SO":
                continue
            for s, o in bm.cells():
                triples.add((s, bm.slice_key, o))
        return store


def _parse_rendered_term(rendered: str) -> Term:
    if rendered.startswith("<") and rendered.endswith(">"):
        return Iri(rendered[1:-1])
    if rendered.startswith('"'):
        body = rendered[1:-1]
        return Literal(body.replace('\\"', '"').replace("\\\\", "\\"))
    return Literal(int(rendered))


def _encode_rowlike(row: CompressedRow) -> list[int]:
    tag = 2 if row.tag == "pos" else row.start_bit
    return [tag, len(row.payload), *row.payload]


def _decode_rowlike(words: list[int], at: int) -> tuple[CompressedRow, int]:
    tag, length = words[at], words[at + 1]
    payload = tuple(words[at + 2 : at + 2 + length])
    at += 2 + length
    if tag == 2:
        return CompressedRow("pos", 0, payload), at
    return CompressedRow("rle", tag, payload), at


def _write_bitmat(path: str, bm: BitMat) -> None:
    words = [KIND_CODES[bm.kind], bm.slice_key, bm.n_rows, bm.n_cols, bm.triple_count]
    words += _encode_rowlike(row_from_mask(bm.nonempty_rows.mask, max(bm.n_rows, 1)))
    words += _encode_rowlike(row_from_mask(bm.nonempty_cols.mask, max(bm.n_cols, 1)))
    words.append(len(bm.rows))
    for idx in sorted(bm.rows):
        words.append(idx)
        words += _encode_rowlike(bm.rows[idx])
    with open(path, "wb") as fh:
        fh.write(struct.pack(f"<{len(words)}I", *words))


def _read_bitmat(path: str) -> BitMat:
    with open(path, "rb") as fh:
        data = fh.read()
    words = list(struct.unpack(f"<{len(data) // 4}I", data))
    kind_code, slice_key, n_rows, n_cols, count = words[:5]
    kind = KIND_NAMES[kind_code]
    spaces = {
        "SO": (bitmat.S, bitmat.O),
        "OS": (bitmat.O, bitmat.S),
        "PS": (bitmat.P, bitmat.S),
        "PO": (bitmat.P, bitmat.O),
    }[kind]
    at = 5
    _, at = _decode_rowlike(words, at)  # non-empty row mask; recomputable
    _, at = _decode_rowlike(words, at)
    n_stored = words[at]
    at += 1
    bm = BitMat(kind, slice_key, spaces[0], spaces[1], n_rows, n_cols)
    for _ in range(n_stored):
        idx = words[at]
        row, at = _decode_rowlike(words, at + 1)
        bm.rows[idx] = row
    bm.refresh_meta()
    if bm.triple_count != count:
        raise StoreError(f"{path}: header count {count} != stored bits {bm.triple_count}")
    return bm
