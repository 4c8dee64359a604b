"""Conjunctive basic-graph-pattern queries: parsing and classification.

Supported surface: ``SELECT <vars> WHERE { <patterns> }`` with '.'-separated
triple patterns. Terms are ``?var``, ``<iri>``, quoted literals, or prefixed
names resolved against a fixed prefix table. No OPTIONAL/FILTER/UNION.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

DEFAULT_PREFIXES: dict[str, str] = {
    "rdf": "http://www.w3.org/1999/02/22-rdf-syntax-ns#",
    "rdfs": "http://www.w3.org/2000/01/rdf-schema#",
    "xsd": "http://www.w3.org/2001/XMLSchema#",
    "ex": "http://example.org/",
}


class QuerySyntaxError(ValueError):
    def __init__(self, message: str, position: int = 0):
        self.position = position
        super().__init__(f"{message} (at offset {position})")


class DisconnectedQuery(ValueError):
    """The patterns do not form a connected graph."""


class UnknownPrefix(ValueError):
    pass


@dataclass(frozen=True)
class Term:
    """A query term: a ``?variable`` or a constant token."""

    text: str

    @property
    def is_variable(self) -> bool:
        return self.text.startswith("?")

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class TriplePattern:
    s: Term
    p: Term
    o: Term

    @property
    def terms(self) -> tuple[Term, Term, Term]:
        return (self.s, self.p, self.o)

    @property
    def variables(self) -> set[str]:
        return {t.text for t in self.terms if t.is_variable}

    def __str__(self) -> str:
        return f"{self.s} {self.p} {self.o}"


@dataclass
class QueryGraph:
    patterns: list[TriplePattern]
    projection: list[str]

    @property
    def variables(self) -> set[str]:
        out: set[str] = set()
        for pat in self.patterns:
            out |= pat.variables
        return out


class Classification(Enum):
    SUBJECT_STAR = "subject-star"
    GENERAL = "general"


_QUERY_RE = re.compile(
    r"^\s*SELECT\s+(?P<vars>.+?)\s+WHERE\s*\{(?P<body>.*)\}\s*$",
    re.IGNORECASE | re.DOTALL,
)
_TERM_RE = re.compile(
    r'\?[A-Za-z_][\w]*'
    r'|<[^>]*>'
    r'|"(?:[^"\\]|\\.)*"(?:\^\^<[^>]*>|@[\w-]+)?'
    r'|[A-Za-z_][\w.-]*:[\w.-]*'
    r'|_:[\w]+'
)
_BODY_TOKEN = re.compile(_TERM_RE.pattern + r'|\.|\S+')


def _resolve(token: str, prefixes: dict[str, str], position: int) -> Term:
    if token.startswith(("?", "<", '"', "_:")):
        return Term(token)
    prefix, _, local = token.partition(":")
    if prefix not in prefixes:
        raise UnknownPrefix(f"unknown prefix {prefix!r} in {token!r}")
    return Term(f"<{prefixes[prefix]}{local}>")


def parse_query(
    text: str, prefixes: dict[str, str] | None = None
) -> QueryGraph:
    """Parse a SELECT query into a QueryGraph, patterns in textual order."""
    prefixes = DEFAULT_PREFIXES if prefixes is None else prefixes
    m = _QUERY_RE.match(text)
    if not m:
        raise QuerySyntaxError("expected 'SELECT <vars> WHERE { ... }'", 0)

    projection = []
    for tok in m.group("vars").split():
        if not tok.startswith("?"):
            raise QuerySyntaxError(f"projection term {tok!r} is not a variable",
                                   text.find(tok))
        projection.append(tok)

    body = m.group("body")
    patterns: list[TriplePattern] = []
    offset = m.start("body")
    group: list[tuple[str, int]] = []

    def close_group(position: int) -> None:
        if not group:
            return
        if len(group) != 3:
            raise QuerySyntaxError(
                f"expected a 3-term pattern, got {' '.join(t for t, _ in group)!r}",
                offset + group[0][1],
            )
        s, p, o = (_resolve(t, prefixes, offset + at) for t, at in group)
        patterns.append(TriplePattern(s, p, o))
        group.clear()

    # '.' separates patterns only at top level; dots inside IRIs, literals,
    # and prefixed names belong to the term.
    for tok in _BODY_TOKEN.finditer(body):
        text = tok.group()
        if text == ".":
            close_group(tok.start())
        elif _TERM_RE.fullmatch(text):
            group.append((text, tok.start()))
        elif not text.startswith(("<", '"', "?")) and text.endswith(".") and _TERM_RE.fullmatch(text[:-1]):
            group.append((text[:-1], tok.start()))
            close_group(tok.end())
        else:
            raise QuerySyntaxError(f"unexpected token {text!r}", offset + tok.start())
    close_group(len(body))

    if not patterns:
        raise QuerySyntaxError("empty pattern block", offset)

    q = QueryGraph(patterns, projection)
    for v in projection:
        if v not in q.variables:
            raise QuerySyntaxError(f"projection variable {v} not used", 0)
    _check_connected(q)
    return q


def _check_connected(q: QueryGraph) -> None:
    """Patterns must connect through shared terms (variables or constants)."""
    n = len(q.patterns)
    if n <= 1:
        return
    term_sets = [{t.text for t in pat.terms} for pat in q.patterns]
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in range(n):
            if j not in seen and term_sets[i] & term_sets[j]:
                seen.add(j)
                frontier.append(j)
    if len(seen) != n:
        raise DisconnectedQuery(
            f"{n - len(seen)} pattern(s) share no term with the rest"
        )


def classify(q: QueryGraph) -> Classification:
    """SUBJECT_STAR iff every pattern has the same subject term and no other
    term is shared between two patterns (all joins are on that subject)."""
    if len(q.patterns) == 1:
        return Classification.SUBJECT_STAR
    subjects = {pat.s.text for pat in q.patterns}
    if len(subjects) != 1:
        return Classification.GENERAL
    subject = next(iter(subjects))
    seen: set[str] = set()
    for pat in q.patterns:
        for t in (pat.p, pat.o):
            if t.is_variable or t.text == subject:
                if t.text != subject and t.text in seen:
                    return Classification.GENERAL
                if t.text != subject:
                    seen.add(t.text)
    return Classification.SUBJECT_STAR


def format_query(q: QueryGraph) -> str:
    """Inverse of parse_query up to whitespace."""
    pats = " . ".join(str(p) for p in q.patterns)
    return f"SELECT {' '.join(q.projection)} WHERE {{ {pats} }}"
