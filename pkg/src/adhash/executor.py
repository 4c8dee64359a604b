"""Distributed and parallel query execution over an in-process cluster.

Workers never share mutable state: every cross-worker interaction goes
through explicit message payloads that a trace recorder can count. Each
distributed semi-join (DSJ) step runs in three barrier-separated phases:
project and ship the join column, semi-join remotely and reply with candidate
triples, then finalize with a local hash join.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .model import Dictionary, EncodedTriple, TermId
from .partitioning import ClusterConfig
from .planner import ExecutionPlan, JoinMode, local_plan
from .query import QueryGraph, TriplePattern
from .storage import PredicateStats, WorkerStore

# A resolved pattern position: a constant term id or a '?variable' name.
Slot = Union[TermId, str]


@dataclass(frozen=True)
class ResolvedPattern:
    s: Slot
    p: Slot
    o: Slot

    @property
    def variables(self) -> tuple[str, ...]:
        seen: list[str] = []
        for slot in (self.s, self.p, self.o):
            if isinstance(slot, str) and slot not in seen:
                seen.append(slot)
        return tuple(seen)


class UnknownConstant(LookupError):
    """A query constant that is absent from the dictionary."""


def resolve_pattern(
    pattern: TriplePattern, dictionary: Dictionary
) -> ResolvedPattern:
    """Map a pattern's constants to term ids; unknown constants raise."""
    slots = []
    for term in pattern.terms:
        if term.is_variable:
            slots.append(term.text)
        else:
            tid = dictionary.lookup(term.text)
            if tid is None:
                raise UnknownConstant(term.text)
            slots.append(tid)
    return ResolvedPattern(*slots)


@dataclass
class BindingTable:
    """A set of variable bindings: named columns over rows of term ids."""

    columns: tuple[str, ...]
    rows: set[tuple[TermId, ...]] = field(default_factory=set)

    @classmethod
    def empty(cls, columns: Sequence[str] = ()) -> "BindingTable":
        return cls(tuple(columns), set())

    def project(self, columns: Sequence[str]) -> "BindingTable":
        idx = [self.columns.index(c) for c in columns]
        return BindingTable(tuple(columns), {tuple(r[i] for i in idx) for r in self.rows})

    def column(self, name: str) -> set[TermId]:
        i = self.columns.index(name)
        return {r[i] for r in self.rows}

    def __len__(self) -> int:
        return len(self.rows)

    def __bool__(self) -> bool:
        return bool(self.rows)


def union_tables(tables: Iterable[BindingTable], columns: tuple[str, ...]) -> BindingTable:
    out = BindingTable(columns, set())
    for t in tables:
        if not t.rows:
            continue
        if t.columns == columns:
            out.rows |= t.rows
        else:
            out.rows |= t.project(columns).rows
    return out


def join_tables(left: BindingTable, right: BindingTable) -> BindingTable:
    """Hash join on every shared column."""
    shared = [c for c in left.columns if c in right.columns]
    extra = [c for c in right.columns if c not in left.columns]
    out_cols = left.columns + tuple(extra)
    if not shared:  # Cartesian joins are never planned; guard anyway
        rows = {lr + rr for lr in left.rows for rr in right.rows}
        return BindingTable(out_cols, rows)
    l_idx = [left.columns.index(c) for c in shared]
    r_idx = [right.columns.index(c) for c in shared]
    e_idx = [right.columns.index(c) for c in extra]
    buckets: dict[tuple, list[tuple]] = {}
    for rr in right.rows:
        buckets.setdefault(tuple(rr[i] for i in r_idx), []).append(
            tuple(rr[i] for i in e_idx)
        )
    rows = set()
    for lr in left.rows:
        for tail in buckets.get(tuple(lr[i] for i in l_idx), ()):
            rows.add(lr + tail)
    return BindingTable(out_cols, rows)


def match_pattern(store: WorkerStore, rp: ResolvedPattern) -> BindingTable:
    """All local bindings of a triple pattern. Variable predicates iterate
    every predicate bucket; repeated variables must bind consistently."""
    cols = rp.variables
    table = BindingTable(cols, set())

    def emit(s: TermId, p: TermId, o: TermId) -> None:
        binding: dict[str, TermId] = {}
        for slot, val in ((rp.s, s), (rp.p, p), (rp.o, o)):
            if isinstance(slot, str):
                if binding.setdefault(slot, val) != val:
                    return
            elif slot != val:
                return
        table.rows.add(tuple(binding[c] for c in cols))

    preds = [rp.p] if isinstance(rp.p, int) else list(store.predicates())
    for p in preds:
        if isinstance(rp.s, int):
            for o in store.lookup_ps(rp.s, p):
                emit(rp.s, p, o)
        elif isinstance(rp.o, int):
            for s in store.lookup_po(rp.o, p):
                emit(s, p, rp.o)
        else:
            for s, o in store.scan(p):
                emit(s, p, o)
    return table


def match_count(store: WorkerStore, rp: ResolvedPattern) -> int:
    """Cheap local candidate count for planning (index lookups only)."""
    preds = [rp.p] if isinstance(rp.p, int) else list(store.predicates())
    total = 0
    for p in preds:
        if isinstance(rp.s, int):
            total += len(store.lookup_ps(rp.s, p))
        elif isinstance(rp.o, int):
            total += len(store.lookup_po(rp.o, p))
        else:
            total += len(store.scan(p))
    return total


def probe_join(
    store: WorkerStore, left: BindingTable, rp: ResolvedPattern
) -> BindingTable:
    """Join ``left`` with a pattern via per-row index probes; no messages."""
    new_vars = [v for v in rp.variables if v not in left.columns]
    out = BindingTable(left.columns + tuple(new_vars), set())
    col_pos = {c: i for i, c in enumerate(left.columns)}

    def slot_value(slot: Slot, row: tuple) -> Optional[TermId]:
        if isinstance(slot, int):
            return slot
        i = col_pos.get(slot)
        return None if i is None else row[i]

    for row in left.rows:
        s_val = slot_value(rp.s, row)
        p_val = slot_value(rp.p, row)
        o_val = slot_value(rp.o, row)
        preds = [p_val] if p_val is not None else list(store.predicates())
        for p in preds:
            if s_val is not None and o_val is not None:
                matches = [(s_val, o_val)] if o_val in store.lookup_ps(s_val, p) else []
            elif s_val is not None:
                matches = [(s_val, o) for o in store.lookup_ps(s_val, p)]
            elif o_val is not None:
                matches = [(s, o_val) for s in store.lookup_po(o_val, p)]
            else:
                matches = list(store.scan(p))
            for s, o in matches:
                binding = {}
                ok = True
                for slot, val in ((rp.s, s), (rp.p, p), (rp.o, o)):
                    if isinstance(slot, str) and slot in binding and binding[slot] != val:
                        ok = False
                        break
                    if isinstance(slot, str):
                        binding[slot] = val
                if ok:
                    out.rows.add(row + tuple(binding[v] for v in new_vars))
    return out


@dataclass
class TraceEntry:
    step: int
    mode: str
    rows_sent: int
    rows_received: int


class TraceRecorder:
    """Per-step inter-worker payload accounting. Local slices (a worker's own
    projected column or its own candidate triples) are not payload."""

    def __init__(self):
        self.entries: list[TraceEntry] = []

    def record(self, step: int, mode: JoinMode, sent: int, received: int) -> None:
        self.entries.append(TraceEntry(step, mode.value, sent, received))

    @property
    def total_payload_rows(self) -> int:
        return sum(e.rows_sent + e.rows_received for e in self.entries)

    def tsv(self) -> str:
        lines = ["step\tmode\trows_sent\trows_received"]
        for e in self.entries:
            lines.append(f"{e.step}\t{e.mode}\t{e.rows_sent}\t{e.rows_received}")
        return "\n".join(lines)


class Worker:
    """One worker context: its base triple shard plus replica storage modules
    keyed by the pattern-index edge they materialize."""

    def __init__(self, wid: int, store: WorkerStore):
        self.wid = wid
        self.store = store
        self.replicas: dict[tuple, WorkerStore] = {}

    def replica_count(self) -> int:
        return sum(len(m) for m in self.replicas.values())


class Cluster:
    """The master's handle on all worker contexts."""

    def __init__(self, cfg: ClusterConfig, workers: list[Worker], dictionary: Dictionary):
        self.cfg = cfg
        self.workers = workers
        self.dictionary = dictionary

    @property
    def num_workers(self) -> int:
        return self.cfg.num_workers

    def consult(self, pattern: TriplePattern) -> tuple[int, dict[str, int]]:
        """Exact base cardinalities for constant-attached or variable-predicate
        patterns: total matches and distinct bindings per variable."""
        try:
            rp = resolve_pattern(pattern, self.dictionary)
        except UnknownConstant:
            return 0, {v: 0 for v in pattern.variables}
        total = 0
        distinct: dict[str, set[TermId]] = {v: set() for v in rp.variables}
        for w in self.workers:
            t = match_pattern(w.store, rp)
            total += len(t)
            for v in rp.variables:
                distinct[v] |= t.column(v)
        return total, {v: len(vals) for v, vals in distinct.items()}


def dsj_step(
    cluster: Cluster,
    lefts: list[BindingTable],
    rp: ResolvedPattern,
    mode: JoinMode,
    join_var: str,
    source_stores: Optional[list[WorkerStore]] = None,
    trace: Optional[TraceRecorder] = None,
    step: int = 0,
) -> list[BindingTable]:
    """One distributed semi-join: ship the projected join column, semi-join at
    the receivers, ship candidate triples back, finalize locally."""
    n = cluster.num_workers
    stores = source_stores or [w.store for w in cluster.workers]

    # Phase 1: project and ship. inbox[receiver][sender] = projected values.
    inbox: list[dict[int, set[TermId]]] = [dict() for _ in range(n)]
    sent = 0
    for w in range(n):
        if not lefts[w]:
            continue
        projected = lefts[w].column(join_var)
        if mode is JoinMode.HASH_DISTRIBUTE:
            buckets: dict[int, set[TermId]] = {}
            for v in projected:
                buckets.setdefault(cluster.cfg.worker_of(v), set()).add(v)
            for r, vals in buckets.items():
                inbox[r][w] = vals
                if r != w:
                    sent += len(vals)
        else:
            for r in range(n):
                inbox[r][w] = projected
                if r != w:
                    sent += len(projected)

    # Phase 2: semi-join against the local index, reply with candidates.
    # replies[sender][receiver] = candidate bindings of the pattern.
    replies: list[dict[int, BindingTable]] = [dict() for _ in range(n)]
    received = 0
    for r in range(n):
        for w, vals in inbox[r].items():
            candidates = _semi_join(stores[r], rp, join_var, vals)
            if candidates:
                replies[w][r] = candidates
                if r != w:
                    received += len(candidates)

    if trace is not None:
        trace.record(step, mode, sent, received)

    # Phase 3: finalize with a local hash join per worker.
    out: list[BindingTable] = []
    for w in range(n):
        if not lefts[w] or not replies[w]:
            out.append(BindingTable.empty(lefts[w].columns + tuple(
                v for v in rp.variables if v not in lefts[w].columns)))
            continue
        merged = union_tables(replies[w].values(), next(iter(replies[w].values())).columns)
        out.append(join_tables(lefts[w], merged))
    return out


def _semi_join(
    store: WorkerStore, rp: ResolvedPattern, join_var: str, values: set[TermId]
) -> BindingTable:
    """Candidate bindings of ``rp`` whose join column lies in ``values``."""
    table = BindingTable(rp.variables, set())
    j = rp.variables.index(join_var)
    if rp.s == join_var and isinstance(rp.p, int):
        for v in values:
            for o in store.lookup_ps(v, rp.p):
                _emit_semi(table, rp, v, rp.p, o)
    elif rp.o == join_var and isinstance(rp.p, int):
        for v in values:
            for s in store.lookup_po(v, rp.p):
                _emit_semi(table, rp, s, rp.p, v)
    else:
        full = match_pattern(store, rp)
        table.rows = {r for r in full.rows if r[j] in values}
    return table


def _emit_semi(
    table: BindingTable, rp: ResolvedPattern, s: TermId, p: TermId, o: TermId
) -> None:
    binding: dict[str, TermId] = {}
    for slot, val in ((rp.s, s), (rp.p, p), (rp.o, o)):
        if isinstance(slot, str):
            if binding.setdefault(slot, val) != val:
                return
        elif slot != val:
            return
    table.rows.add(tuple(binding[c] for c in table.columns))


def execute_distributed(
    cluster: Cluster,
    q: QueryGraph,
    plan: ExecutionPlan,
    trace: Optional[TraceRecorder] = None,
) -> BindingTable:
    """Run a planned ordering with DSJ and local hash joins; the result is the
    union over workers projected to the query's projection."""
    try:
        resolved = [resolve_pattern(p, cluster.dictionary) for p in q.patterns]
    except UnknownConstant:
        return BindingTable.empty(q.projection)

    first = plan.steps[0].pattern_index
    lefts = [match_pattern(w.store, resolved[first]) for w in cluster.workers]
    for step_no, step in enumerate(plan.steps[1:], start=1):
        rp = resolved[step.pattern_index]
        if step.mode is JoinMode.NO_COMM:
            lefts = [
                probe_join(w.store, lefts[w.wid], rp) for w in cluster.workers
            ]
            if trace is not None:
                trace.record(step_no, JoinMode.NO_COMM, 0, 0)
        else:
            lefts = dsj_step(
                cluster, lefts, rp, step.mode, step.join_variable,
                trace=trace, step=step_no,
            )
    return union_tables(
        (t.project(q.projection) for t in lefts), tuple(q.projection)
    )


def execute_parallel(
    cluster: Cluster,
    q: QueryGraph,
    pattern_stores: Optional[list[dict[int, WorkerStore]]] = None,
    trace: Optional[TraceRecorder] = None,
) -> BindingTable:
    """Evaluate a query with zero inter-worker communication.

    Each worker plans autonomously from its local candidate counts and joins
    entirely against local storage. ``pattern_stores`` maps each pattern index
    to the storage module it should probe on each worker (main index by
    default; replica modules after redistribution).
    """
    try:
        resolved = [resolve_pattern(p, cluster.dictionary) for p in q.patterns]
    except UnknownConstant:
        return BindingTable.empty(q.projection)

    partials = []
    for w in cluster.workers:
        stores = (
            pattern_stores[w.wid]
            if pattern_stores is not None
            else {i: w.store for i in range(len(q.patterns))}
        )
        counts = [match_count(stores[i], resolved[i]) for i in range(len(q.patterns))]
        order = local_plan(counts, [p.variables for p in q.patterns])
        table = match_pattern(stores[order[0]], resolved[order[0]])
        for i in order[1:]:
            if not table:
                break
            table = probe_join(stores[i], table, resolved[i])
        partials.append(table.project(q.projection) if table else BindingTable.empty(q.projection))

    if trace is not None:
        trace.record(0, JoinMode.NO_COMM, 0, 0)
    return union_tables(partials, tuple(q.projection))
