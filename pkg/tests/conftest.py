"""Shared test helpers: fixtures, an independent evaluation oracle, and
random graph/query generators.

The oracle is a deliberately naive centralized nested-loop evaluator over
decoded text triples. It shares no code with the engine's storage, planning,
or execution layers, so agreement between the two is meaningful evidence.
"""

from __future__ import annotations

import random
from pathlib import Path
from typing import Iterable, Optional

import pytest

from adhash.engine import Engine, RunConfig
from adhash.query import (
    DisconnectedQuery,
    QueryGraph,
    Term,
    TriplePattern,
    parse_query,
)

FIXTURES = Path(__file__).parent / "fixtures"
ACADEMIC = FIXTURES / "academic.nt"

EX = "http://example.org/"


def ex(name: str) -> str:
    return f"<{EX}{name}>"


@pytest.fixture
def academic_engine() -> Engine:
    return Engine.load(ACADEMIC, RunConfig(num_workers=2, adaptive=False))


def academic_triples() -> list[tuple[str, str, str]]:
    return read_triples(ACADEMIC)


def read_triples(path: Path) -> list[tuple[str, str, str]]:
    out = []
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.rstrip(" .").split()
        assert len(parts) == 3, line
        out.append(tuple(parts))
    return out


# ---------------------------------------------------------------------------
# Centralized nested-loop oracle


def _extend(
    binding: dict[str, str], pattern: TriplePattern, triple: tuple[str, str, str]
) -> Optional[dict[str, str]]:
    out = dict(binding)
    for term, value in zip(pattern.terms, triple):
        if term.is_variable:
            if out.setdefault(term.text, value) != value:
                return None
        elif term.text != value:
            return None
    return out


def oracle(
    triples: Iterable[tuple[str, str, str]], q: QueryGraph
) -> set[tuple[str, ...]]:
    """Evaluate a query by exhaustive nested loops over the raw triples."""
    triples = list(triples)
    bindings: list[dict[str, str]] = [{}]
    for pattern in q.patterns:
        nxt = []
        for b in bindings:
            for t in triples:
                extended = _extend(b, pattern, t)
                if extended is not None:
                    nxt.append(extended)
        bindings = nxt
        if not bindings:
            break
    return {tuple(b[v] for v in q.projection) for b in bindings}


def fast_oracle(
    triples: list[tuple[str, str, str]], q: QueryGraph
) -> set[tuple[str, ...]]:
    """Independent evaluator for large inputs: same binding-extension logic as
    ``oracle`` but candidate triples come from plain dict indexes built
    directly over the text triples."""
    from collections import defaultdict

    by_p = defaultdict(list)
    by_ps = defaultdict(list)
    by_po = defaultdict(list)
    for t in triples:
        by_p[t[1]].append(t)
        by_ps[t[1], t[0]].append(t)
        by_po[t[1], t[2]].append(t)

    bindings: list[dict[str, str]] = [{}]
    for pat in q.patterns:
        out = []
        for b in bindings:
            s = pat.s.text if not pat.s.is_variable else b.get(pat.s.text)
            p = pat.p.text if not pat.p.is_variable else b.get(pat.p.text)
            o = pat.o.text if not pat.o.is_variable else b.get(pat.o.text)
            if p is not None and s is not None:
                cands = by_ps.get((p, s), ())
            elif p is not None and o is not None:
                cands = by_po.get((p, o), ())
            elif p is not None:
                cands = by_p.get(p, ())
            else:
                cands = triples
            for t in cands:
                extended = _extend(b, pat, t)
                if extended is not None:
                    out.append(extended)
        bindings = out
        if not bindings:
            break
    return {tuple(b[v] for v in q.projection) for b in bindings}


# ---------------------------------------------------------------------------
# Random data and query generation


def random_graph(
    rng: random.Random,
    num_triples: int,
    num_predicates: int,
    num_vertices: Optional[int] = None,
) -> list[tuple[str, str, str]]:
    if num_vertices is None:
        num_vertices = max(4, num_triples // 3)
    preds = [ex(f"p{i}") for i in range(num_predicates)]
    verts = [ex(f"v{i}") for i in range(num_vertices)]
    triples = {
        (rng.choice(verts), rng.choice(preds), rng.choice(verts))
        for _ in range(num_triples)
    }
    return sorted(triples)


def ntriples_lines(triples: Iterable[tuple[str, str, str]]) -> list[str]:
    return [f"{s} {p} {o} ." for s, p, o in triples]


def engine_from_triples(
    triples: Iterable[tuple[str, str, str]], config: RunConfig
) -> Engine:
    return Engine.load(ntriples_lines(triples), config)


def _variable_connected(patterns: list[TriplePattern]) -> bool:
    """True when the patterns connect through shared variables (the planner
    requires every pattern to share a variable with some prefix)."""
    n = len(patterns)
    if n <= 1:
        return bool(patterns and patterns[0].variables)
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in range(n):
            if j not in seen and patterns[i].variables & patterns[j].variables:
                seen.add(j)
                frontier.append(j)
    return len(seen) == n


def random_query(
    rng: random.Random,
    triples: list[tuple[str, str, str]],
    num_patterns: int,
    var_predicate_prob: float = 0.1,
) -> QueryGraph:
    """A random connected query biased toward non-empty answers: patterns are
    built from actual triples sharing terms, then terms are consistently
    replaced by variables."""
    for _ in range(200):
        chosen = [rng.choice(triples)]
        for _ in range(num_patterns - 1):
            terms = {x for t in chosen for x in (t[0], t[2])}
            candidates = [
                t for t in triples if (t[0] in terms or t[2] in terms)
                and t not in chosen
            ]
            if not candidates:
                break
            chosen.append(rng.choice(candidates))
        if len(chosen) < num_patterns:
            continue

        var_of: dict[str, str] = {}

        def as_term(value: str, make_var_prob: float) -> Term:
            if value in var_of:
                return Term(var_of[value])
            if rng.random() < make_var_prob:
                var_of[value] = f"?x{len(var_of)}"
                return Term(var_of[value])
            return Term(value)

        patterns = []
        for s, p, o in chosen:
            patterns.append(
                TriplePattern(
                    as_term(s, 0.85),
                    Term(p) if rng.random() > var_predicate_prob else as_term(p, 1.0),
                    as_term(o, 0.6),
                )
            )
        variables = sorted({v for pat in patterns for v in pat.variables})
        if not variables or not _variable_connected(patterns):
            continue
        k = rng.randint(1, len(variables))
        projection = sorted(rng.sample(variables, k))
        return QueryGraph(patterns, projection)
    raise AssertionError("could not generate a connected query")


def parse(text: str) -> QueryGraph:
    return parse_query(text)
