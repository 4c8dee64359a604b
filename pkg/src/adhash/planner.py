"""Locality-aware cost-based join ordering.

The master plans general queries with dynamic programming over left-deep
orderings. Each search state tracks the best ordering for a pattern subset,
its estimated communication cost in triple-transfer units, the cumulative
intermediate cardinality, and per-variable binding-count estimates. Joins on
the pinned subject (the subject of the first executed pattern) are free; other
joins ship a projected column either hash-distributed (join column is the next
pattern's subject) or broadcast (object/predicate column).
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

from .query import QueryGraph, Term, TriplePattern
from .storage import PredicateEntry, PredicateStats


class JoinMode(Enum):
    NO_COMM = "no-comm"
    HASH_DISTRIBUTE = "hash-distribute"
    BROADCAST = "broadcast"


class NoSharedVariable(ValueError):
    pass


class NoPlan(ValueError):
    pass


@dataclass(frozen=True)
class PlanStep:
    pattern_index: int
    mode: JoinMode
    join_variable: Optional[str]  # None for the base step
    est_cost: float = 0.0


@dataclass
class ExecutionPlan:
    steps: list[PlanStep]
    pinned_subject: Optional[str]
    est_cost: float
    cum_card: float

    @property
    def ordering(self) -> tuple[int, ...]:
        return tuple(s.pattern_index for s in self.steps)

    def explain(self, patterns: Sequence[TriplePattern]) -> str:
        lines = [f"estimated cost: {self.est_cost:g}",
                 f"cumulative cardinality: {self.cum_card:g}",
                 f"pinned subject: {self.pinned_subject}"]
        for i, step in enumerate(self.steps, start=1):
            pat = patterns[step.pattern_index]
            join = f" on {step.join_variable}" if step.join_variable else ""
            lines.append(
                f"  step {i}: [{pat}] {step.mode.value}{join} "
                f"(cost {step.est_cost:g})"
            )
        return "\n".join(lines)


@dataclass
class DPState:
    subgraph: frozenset[int]
    ordering: tuple[int, ...]
    cost: float
    cum_card: float
    bindings: dict[str, float]
    pinned_subject: Optional[str]


@dataclass
class PatternEstimate:
    """Base cardinalities of one pattern, possibly refined by the workers."""

    cardinality: float
    bindings: dict[str, float]
    stats: PredicateEntry


def join_info(
    pinned_subject: Optional[str],
    covered_vars: set[str],
    nxt: TriplePattern,
) -> tuple[JoinMode, str]:
    """Pick the join column of ``nxt`` and the communication mode.

    The subject column is preferred whenever it is a join attribute: it joins
    for free on the pinned subject and hash-distributes otherwise. Any other
    join column forces a broadcast; residual shared columns are checked during
    join finalization.
    """
    shared = nxt.variables & covered_vars
    if not shared:
        raise NoSharedVariable(f"pattern [{nxt}] shares no variable")
    if nxt.s.is_variable and nxt.s.text in shared:
        if nxt.s.text == pinned_subject:
            return JoinMode.NO_COMM, nxt.s.text
        return JoinMode.HASH_DISTRIBUTE, nxt.s.text
    # Deterministic pick among non-subject join columns: object before
    # predicate, then name order.
    candidates = []
    if nxt.o.is_variable and nxt.o.text in shared:
        candidates.append(nxt.o.text)
    if nxt.p.is_variable and nxt.p.text in shared:
        candidates.append(nxt.p.text)
    return JoinMode.BROADCAST, candidates[0]


def expansion_cost(
    b_cj: float,
    num_vars: int,
    mode: JoinMode,
    stats: PredicateEntry,
    num_workers: int,
) -> float:
    """Communication of one DSJ expansion: ship the projected join column,
    then ship back candidate triples (constants are not communicated)."""
    if mode is JoinMode.NO_COMM:
        return 0.0
    if mode is JoinMode.HASH_DISTRIBUTE:
        return b_cj + num_vars * b_cj * stats.per_subject
    return b_cj * num_workers + num_vars * num_workers * b_cj * stats.per_object


def reestimate_bindings(
    state_bindings: dict[str, float],
    state_card: float,
    nxt: TriplePattern,
    join_var: str,
    est: PatternEstimate,
) -> tuple[dict[str, float], float]:
    """Upper-bound re-estimation of variable binding counts and the cumulative
    cardinality after joining ``nxt``."""
    num_vars = sum(1 for t in nxt.terms if t.is_variable)
    new = dict(state_bindings)
    for term, position in ((nxt.s, "s"), (nxt.o, "o"), (nxt.p, "p")):
        if not term.is_variable:
            continue
        v = term.text
        prior = new.get(v, est.bindings.get(v, est.cardinality))
        p_v = est.bindings.get(v, est.cardinality)  # |p.s| or |p.o| analogue
        if num_vars == 1:
            new[v] = min(prior, est.cardinality)
        elif v == join_var or position == "p":
            new[v] = min(prior, p_v)
        else:
            per_v = est.stats.per_subject if position == "s" else est.stats.per_object
            new[v] = min(prior, prior * per_v, p_v)

    has_constant = not nxt.s.is_variable or not nxt.o.is_variable
    if has_constant:
        per_cj = 1.0
    elif join_var == nxt.s.text:
        per_cj = est.stats.per_subject
    else:
        per_cj = est.stats.per_object
    return new, state_card * (1.0 + per_cj)


def base_estimates(
    q: QueryGraph,
    stats: PredicateStats,
    resolve: Callable[[str], Optional[int]],
    consult: Optional[Callable[[TriplePattern], tuple[int, dict[str, int]]]] = None,
) -> list[PatternEstimate]:
    """Initial cardinality estimates for every pattern.

    Variable-subject/object patterns take their counts straight from the
    global statistics. Patterns attached to constants or with variable
    predicates are refined by consulting the workers (``consult`` returns the
    actual match count and per-variable distinct binding counts).
    """
    estimates = []
    for pat in q.patterns:
        if pat.p.is_variable:
            entry = _combined_entry(stats)
        else:
            pid = resolve(pat.p.text)
            entry = stats.get(pid) if pid is not None else PredicateEntry()
        card = float(entry.count)
        bindings: dict[str, float] = {}
        if pat.s.is_variable:
            bindings[pat.s.text] = float(entry.distinct_subjects)
        if pat.o.is_variable:
            bindings[pat.o.text] = float(entry.distinct_objects)
        if pat.p.is_variable:
            bindings[pat.p.text] = float(len(list(stats.predicates())))
        needs_consult = (
            not pat.s.is_variable or not pat.o.is_variable or pat.p.is_variable
        )
        if consult is not None and needs_consult:
            card_exact, distinct = consult(pat)
            card = float(card_exact)
            for v, n in distinct.items():
                bindings[v] = float(n)
        estimates.append(PatternEstimate(card, bindings, entry))
    return estimates


def _combined_entry(stats: PredicateStats) -> PredicateEntry:
    """Summed statistics used when the predicate position is a variable."""
    total = PredicateEntry()
    for p in stats.predicates():
        e = stats.get(p)
        total.count += e.count
        total.distinct_subjects += e.distinct_subjects
        total.distinct_objects += e.distinct_objects
    return total


def _seed_order(q: QueryGraph) -> list[int]:
    """Consider first the patterns whose subject has the most outgoing edges;
    ties break by subject name, then pattern index."""
    outgoing: dict[str, int] = {}
    for pat in q.patterns:
        outgoing[pat.s.text] = outgoing.get(pat.s.text, 0) + 1
    indexed = list(range(len(q.patterns)))
    indexed.sort(key=lambda i: (-outgoing[q.patterns[i].s.text],
                                q.patterns[i].s.text, i))
    return indexed


def optimize(
    q: QueryGraph,
    stats: PredicateStats,
    num_workers: int,
    resolve: Callable[[str], Optional[int]],
    consult: Optional[Callable[[TriplePattern], tuple[int, dict[str, int]]]] = None,
) -> ExecutionPlan:
    """Find the left-deep ordering with the least estimated communication.

    Equal-cost states keep the lower cumulative cardinality; exact ties break
    on the lexicographically smallest ordering for determinism. A global
    minimum-cost bound prunes branches early (the cost function is monotone).
    """
    n = len(q.patterns)
    estimates = base_estimates(q, stats, resolve, consult)
    if n == 1:
        est = estimates[0]
        pinned = q.patterns[0].s.text if q.patterns[0].s.is_variable else None
        return ExecutionPlan(
            [PlanStep(0, JoinMode.NO_COMM, None)], pinned, 0.0, est.cardinality
        )

    best: dict[frozenset[int], DPState] = {}
    for i in _seed_order(q):
        pat = q.patterns[i]
        est = estimates[i]
        state = DPState(
            subgraph=frozenset([i]),
            ordering=(i,),
            cost=0.0,
            cum_card=est.cardinality,
            bindings=dict(est.bindings),
            pinned_subject=pat.s.text if pat.s.is_variable else None,
        )
        _relax(best, state)

    min_complete = float("inf")
    frontier = [best[k] for k in sorted(best, key=lambda k: min(k))]
    while frontier:
        next_frontier: list[DPState] = []
        for state in frontier:
            if best.get(state.subgraph) is not state:
                continue  # superseded
            if state.cost > min_complete:
                continue
            covered = _covered_vars(q, state.subgraph)
            for j in range(n):
                if j in state.subgraph:
                    continue
                nxt = q.patterns[j]
                if not (nxt.variables & covered):
                    continue
                mode, join_var = join_info(state.pinned_subject, covered, nxt)
                est = estimates[j]
                b_cj = state.bindings.get(join_var, est.bindings.get(join_var, est.cardinality))
                num_vars = sum(1 for t in nxt.terms if t.is_variable)
                cost = state.cost + expansion_cost(
                    b_cj, num_vars, mode, est.stats, num_workers
                )
                if cost > min_complete:
                    continue
                bindings, cum = reestimate_bindings(
                    state.bindings, state.cum_card, nxt, join_var, est
                )
                new = DPState(
                    subgraph=state.subgraph | {j},
                    ordering=state.ordering + (j,),
                    cost=cost,
                    cum_card=cum,
                    bindings=bindings,
                    pinned_subject=state.pinned_subject,
                )
                if len(new.subgraph) == n:
                    min_complete = min(min_complete, new.cost)
                if _relax(best, new):
                    next_frontier.append(new)
        frontier = next_frontier

    final = best.get(frozenset(range(n)))
    if final is None:
        raise NoPlan("no connected left-deep ordering covers every pattern")
    return _to_plan(q, estimates, final, num_workers)


def _relax(best: dict[frozenset[int], DPState], state: DPState) -> bool:
    cur = best.get(state.subgraph)
    if cur is None or (state.cost, state.cum_card, state.ordering) < (
        cur.cost, cur.cum_card, cur.ordering
    ):
        best[state.subgraph] = state
        return True
    return False


def _covered_vars(q: QueryGraph, subgraph: frozenset[int]) -> set[str]:
    out: set[str] = set()
    for i in subgraph:
        out |= q.patterns[i].variables
    return out


def _to_plan(
    q: QueryGraph,
    estimates: list[PatternEstimate],
    state: DPState,
    num_workers: int,
) -> ExecutionPlan:
    """Replay the winning ordering to record per-step modes and costs."""
    first = state.ordering[0]
    pinned = q.patterns[first].s.text if q.patterns[first].s.is_variable else None
    steps = [PlanStep(first, JoinMode.NO_COMM, None)]
    covered = set(q.patterns[first].variables)
    bindings = dict(estimates[first].bindings)
    cum = estimates[first].cardinality
    total = 0.0
    for j in state.ordering[1:]:
        nxt = q.patterns[j]
        est = estimates[j]
        mode, join_var = join_info(pinned, covered, nxt)
        b_cj = bindings.get(join_var, est.bindings.get(join_var, est.cardinality))
        num_vars = sum(1 for t in nxt.terms if t.is_variable)
        cost = expansion_cost(b_cj, num_vars, mode, est.stats, num_workers)
        steps.append(PlanStep(j, mode, join_var, cost))
        total += cost
        bindings, cum = reestimate_bindings(bindings, cum, nxt, join_var, est)
        covered |= nxt.variables
    return ExecutionPlan(steps, pinned, total, cum)


def enumerate_orderings(q: QueryGraph) -> list[tuple[int, ...]]:
    """All connected left-deep orderings (every pattern after the first shares
    a variable with the prefix). Exponential; test and tooling use only."""
    n = len(q.patterns)
    results: list[tuple[int, ...]] = []

    def grow(ordering: tuple[int, ...], covered: set[str]) -> None:
        if len(ordering) == n:
            results.append(ordering)
            return
        for j in range(n):
            if j in ordering:
                continue
            if q.patterns[j].variables & covered:
                grow(ordering + (j,), covered | q.patterns[j].variables)

    for i in range(n):
        grow((i,), set(q.patterns[i].variables))
    return results


def ordering_cost(
    q: QueryGraph,
    ordering: Sequence[int],
    estimates: list[PatternEstimate],
    num_workers: int,
) -> float:
    """Total estimated cost of one explicit ordering under the same model."""
    first = ordering[0]
    pinned = q.patterns[first].s.text if q.patterns[first].s.is_variable else None
    covered = set(q.patterns[first].variables)
    bindings = dict(estimates[first].bindings)
    cum = estimates[first].cardinality
    total = 0.0
    for j in ordering[1:]:
        nxt = q.patterns[j]
        est = estimates[j]
        mode, join_var = join_info(pinned, covered, nxt)
        b_cj = bindings.get(join_var, est.bindings.get(join_var, est.cardinality))
        num_vars = sum(1 for t in nxt.terms if t.is_variable)
        total += expansion_cost(b_cj, num_vars, mode, est.stats, num_workers)
        bindings, cum = reestimate_bindings(bindings, cum, nxt, join_var, est)
        covered |= nxt.variables
    return total


def local_plan(
    candidate_counts: Sequence[int], variable_sets: Sequence[set[str]]
) -> list[int]:
    """Per-worker ordering for parallel-mode evaluation: start from the
    smallest local candidate set and greedily extend with the cheapest
    pattern that shares a variable with the prefix."""
    n = len(candidate_counts)
    remaining = set(range(n))
    first = min(remaining, key=lambda i: (candidate_counts[i], i))
    order = [first]
    remaining.discard(first)
    covered = set(variable_sets[first])
    while remaining:
        connected = [i for i in remaining if variable_sets[i] & covered]
        pool = connected or list(remaining)
        nxt = min(pool, key=lambda i: (candidate_counts[i], i))
        order.append(nxt)
        remaining.discard(nxt)
        covered |= variable_sets[nxt]
    return order
