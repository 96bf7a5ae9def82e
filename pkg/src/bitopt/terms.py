"""RDF term model shared by the store, the query algebra, and the oracle.

Only the core term kinds are supported: IRIs, plain string literals, and
decimal integer literals. Integer literals compare numerically, strings
lexicographically; IRIs support equality only.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True, slots=True)
class Iri:
    value: str

    def n3(self) -> str:
        return f"<{self.value}>"


@dataclass(frozen=True, slots=True)
class Literal:
    """Plain literal. ``value`` is ``int`` for integers, ``str`` otherwise."""

    value: "int | str"

    @property
    def is_integer(self) -> bool:
        return isinstance(self.value, int)

    def n3(self) -> str:
        if self.is_integer:
            return str(self.value)
        escaped = str(self.value).replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'


Term = Iri | Literal


def term_sort_key(term: Term) -> tuple:
    # IRIs before literals, then by rendered value; keeps output deterministic.
    if isinstance(term, Iri):
        return (0, term.value)
    if term.is_integer:
        return (1, "", term.value)
    return (2, str(term.value), 0)


def render_term(term: "Term | None") -> str:
    """TSV rendering; NULL becomes the empty field."""
    return "" if term is None else term.n3()
