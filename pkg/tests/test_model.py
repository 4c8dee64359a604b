"""Dictionary encoding and N-Triples ingestion."""

from __future__ import annotations

import pytest

from adhash.model import (
    Dictionary,
    EncodedTriple,
    MalformedLine,
    UnknownId,
    load_ntriples,
    parse_ntriples,
)

from conftest import ACADEMIC


def test_dictionary_assigns_dense_first_seen_ids():
    d = Dictionary()
    assert d.encode("<a>") == 0
    assert d.encode("<b>") == 1
    assert d.encode("<a>") == 0
    assert len(d) == 2
    assert d.decode(1) == "<b>"
    assert d.lookup("<c>") is None
    assert "<a>" in d and "<c>" not in d


def test_dictionary_decode_unknown_raises():
    with pytest.raises(UnknownId):
        Dictionary().decode(0)


def test_parse_simple_lines():
    lines = [
        "<s> <p> <o> .",
        "",
        "# a comment",
        '<s> <p> "a literal"@en .',
        '<s> <p> "typed"^^<http://www.w3.org/2001/XMLSchema#int> .',
    ]
    d = Dictionary()
    triples = list(parse_ntriples(lines, d))
    assert len(triples) == 3
    assert triples[0] == EncodedTriple(0, 1, 2)
    assert d.decode(3) == '"a literal"@en'


def test_literals_with_spaces_and_escapes():
    d = Dictionary()
    (t,) = parse_ntriples(['<s> <p> "two words \\" quote" .'], d)
    assert d.decode(t.o) == '"two words \\" quote"'


def test_malformed_line_reports_line_number():
    lines = ["<s> <p> <o> .", "<s> <p> ."]
    with pytest.raises(MalformedLine) as err:
        list(parse_ntriples(lines, Dictionary()))
    assert err.value.line_number == 2


def test_missing_terminator_is_malformed():
    with pytest.raises(MalformedLine):
        list(parse_ntriples(["<s> <p> <o>"], Dictionary()))


def test_load_academic_fixture():
    with open(ACADEMIC) as fh:
        triples, d = load_ntriples(fh)
    assert len(triples) == 14
    assert len(d) == 13
    # First-seen order pins the id layout the cluster fixtures rely on.
    assert d.decode(0) == "<http://example.org/Lisa>"
    assert d.decode(3) == "<http://example.org/Bill>"


def test_duplicate_statements_encode_identically():
    triples, _ = load_ntriples(["<s> <p> <o> .", "<s> <p> <o> ."])
    assert triples[0] == triples[1]
