"""Term dictionary, encoded triples, and N-Triples ingestion.

All engine layers operate on dense integer term ids. The master owns the
dictionary; workers only ever see ids. Literals, IRIs, and blank nodes share a
single id space since the engine treats every term purely as a join key.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, TextIO

TermId = int


class UnknownId(KeyError):
    """Raised when decoding an id that was never assigned."""


class MalformedLine(ValueError):
    """Raised for an input line that is neither blank, comment, nor a
    3-term statement terminated by '.'."""

    def __init__(self, line_number: int, line: str):
        self.line_number = line_number
        self.line = line
        super().__init__(f"malformed statement at line {line_number}: {line!r}")


class EncodedTriple(NamedTuple):
    s: TermId
    p: TermId
    o: TermId


@dataclass
class Dictionary:
    """Bi-directional term dictionary with dense, first-seen-order ids.

    The reverse direction is array-backed, so ``decode`` is an index lookup.
    Construction is single-writer during load; afterwards the dictionary is
    immutable by convention and freely shared read-only.
    """

    forward: dict[str, TermId] = field(default_factory=dict)
    reverse: list[str] = field(default_factory=list)

    def encode(self, term: str) -> TermId:
        """Return the id of ``term``, assigning the next dense id if new."""
        tid = self.forward.get(term)
        if tid is None:
            tid = len(self.reverse)
            self.forward[term] = tid
            self.reverse.append(term)
        return tid

    def lookup(self, term: str) -> TermId | None:
        """Return the id of ``term`` without assigning one."""
        return self.forward.get(term)

    def decode(self, tid: TermId) -> str:
        if 0 <= tid < len(self.reverse):
            return self.reverse[tid]
        raise UnknownId(tid)

    def __len__(self) -> int:
        return len(self.reverse)

    def __contains__(self, term: str) -> bool:
        return term in self.forward


# A term token is an IRI ref, a quoted literal (with optional datatype/lang
# tag), or any other non-whitespace run (prefixed names, blank nodes, '.').
_TOKEN = re.compile(
    r'<[^>]*>'
    r'|"(?:[^"\\]|\\.)*"(?:\^\^<[^>]*>|@[\w-]+)?'
    r'|\S+'
)


def parse_ntriples(
    source: TextIO | Iterable[str], dictionary: Dictionary
) -> Iterator[EncodedTriple]:
    """Encode a line-oriented N-Triples stream into triples.

    Yields one triple per statement line in stream order, extending
    ``dictionary`` as needed. Blank lines and ``#`` comments are skipped.
    """
    for line_number, raw in enumerate(source, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = _TOKEN.findall(line)
        if tokens and tokens[-1] == ".":
            tokens = tokens[:-1]
        elif tokens and not tokens[-1].startswith(('"', "<")) and tokens[-1].endswith("."):
            tokens[-1] = tokens[-1][:-1]
        else:
            raise MalformedLine(line_number, line)
        if len(tokens) != 3 or not all(tokens):
            raise MalformedLine(line_number, line)
        s, p, o = tokens
        yield EncodedTriple(
            dictionary.encode(s), dictionary.encode(p), dictionary.encode(o)
        )


def load_ntriples(
    source: TextIO | Iterable[str], dictionary: Dictionary | None = None
) -> tuple[list[EncodedTriple], Dictionary]:
    """Parse a whole stream, returning the triple list and the dictionary."""
    if dictionary is None:
        dictionary = Dictionary()
    triples = list(parse_ntriples(source, dictionary))
    return triples, dictionary
