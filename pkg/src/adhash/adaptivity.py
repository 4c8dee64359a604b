"""Workload-adaptive incremental redistribution.

The master monitors executed queries in a hierarchical heat map keyed by a
query's core vertex (the highest-scoring vertex after outlier filtering).
When a pattern turns hot, its data is incrementally redistributed: triples
adjacent to the core are hash-placed by their core binding, and each deeper
tree level is collocated with its parents through distributed semi-joins into
per-edge replica storage modules. Redistributed patterns are indexed in the
pattern index; queries whose redistribution tree it contains run fully in
parallel with zero communication. A per-worker replication budget is enforced
with LRU subtree eviction.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Iterator, Optional, Sequence

from .executor import Cluster, ResolvedPattern, Worker, match_pattern
from .model import Dictionary, EncodedTriple, TermId
from .query import QueryGraph, Term, TriplePattern
from .storage import PredicateStats, WorkerStore

NEG_INF = float("-inf")


class UntreeableQuery(ValueError):
    """The query's patterns connect only through predicate variables, so no
    subject/object vertex tree can span every edge. Such queries always run
    distributed and are excluded from workload monitoring."""

# ---------------------------------------------------------------------------
# Vertex scoring


def chauvenet_outliers(scores: dict[Hashable, float]) -> set[Hashable]:
    """Members of a score population rejected by Chauvenet's criterion:
    x is an outlier when n * erfc(|x - mu| / (sigma * sqrt(2))) / 2 < 0.5.
    A zero-spread population has no outliers, and tiny populations (n < 4)
    are never filtered: with two or three points every member sits near one
    standard deviation and the criterion would reject them all."""
    n = len(scores)
    if n < 4:
        return set()
    values = list(scores.values())
    mu = sum(values) / n
    sigma = math.sqrt(sum((v - mu) ** 2 for v in values) / n)
    if sigma == 0.0:
        return set()
    return {
        k
        for k, v in scores.items()
        if n * math.erfc(abs(v - mu) / (sigma * math.sqrt(2))) / 2 < 0.5
    }


def filtered_predicate_scores(
    stats: PredicateStats,
) -> tuple[dict[TermId, float], dict[TermId, float]]:
    """Subject and object scores per predicate, with outlier predicates
    (flagged on either population) forced to -inf."""
    p_s = {p: stats.get(p).subject_score for p in stats.predicates()}
    p_o = {p: stats.get(p).object_score for p in stats.predicates()}
    outliers = chauvenet_outliers(p_s) | chauvenet_outliers(p_o)
    for p in outliers:
        p_s[p] = NEG_INF
        p_o[p] = NEG_INF
    return p_s, p_o


def score_vertices(
    q: QueryGraph,
    stats: PredicateStats,
    resolve,
) -> dict[str, float]:
    """Score every query vertex as the max over its incident contributions:
    the subject score of each outgoing predicate and the object score of each
    incoming one."""
    p_s, p_o = filtered_predicate_scores(stats)
    scores: dict[str, float] = {}
    for pat in q.patterns:
        if pat.p.is_variable:
            s_score = o_score = 0.0
        else:
            pid = resolve(pat.p.text)
            s_score = p_s.get(pid, 0.0) if pid is not None else 0.0
            o_score = p_o.get(pid, 0.0) if pid is not None else 0.0
        for text, contribution in ((pat.s.text, s_score), (pat.o.text, o_score)):
            scores[text] = max(scores.get(text, NEG_INF), contribution)
    return scores


# ---------------------------------------------------------------------------
# Redistribution tree


@dataclass
class TreeNode:
    term: Term
    edges: list["TreeEdge"] = field(default_factory=list)


@dataclass
class TreeEdge:
    predicate: Term
    child: TreeNode
    subject_is_parent: bool
    pattern_index: Optional[int] = None  # source pattern in the query, if any

    @property
    def key(self) -> tuple[str, str]:
        pred = self.predicate.text if not self.predicate.is_variable else "?"
        return (pred, "out" if self.subject_is_parent else "in")


@dataclass
class RedistributionTree:
    root: TreeNode

    def iter_edges(self) -> Iterator[tuple[TreeNode, TreeEdge, int]]:
        """Depth-first preorder: (parent node, edge, depth)."""

        def walk(node: TreeNode, depth: int):
            for e in node.edges:
                yield node, e, depth
                yield from walk(e.child, depth + 1)

        yield from walk(self.root, 0)

    def edge_count(self) -> int:
        return sum(1 for _ in self.iter_edges())

    def pattern_for(self, parent: TreeNode, edge: TreeEdge) -> TriplePattern:
        if edge.subject_is_parent:
            return TriplePattern(parent.term, edge.predicate, edge.child.term)
        return TriplePattern(edge.child.term, edge.predicate, parent.term)


def core_vertex(scores: dict[str, float]) -> str:
    """Highest score wins; ties break on the vertex name for determinism."""
    return min(scores, key=lambda v: (-scores[v], v))


def build_redistribution_tree(
    q: QueryGraph, scores: dict[str, float]
) -> RedistributionTree:
    """Transform a query into an edge-spanning tree rooted at the core.

    Modified breadth-first traversal over the undirected query graph with a
    priority queue ordered by vertex score (descending), then edge label,
    then child name. Edges reaching an already-visited or pending vertex
    attach to a duplicated leaf, so cycles break while every query edge
    appears exactly once.
    """
    terms: dict[str, Term] = {}
    incident: dict[str, list[tuple[int, str, bool]]] = {}
    for i, pat in enumerate(q.patterns):
        terms.setdefault(pat.s.text, pat.s)
        terms.setdefault(pat.o.text, pat.o)
        incident.setdefault(pat.s.text, []).append((i, pat.o.text, True))
        if pat.o.text != pat.s.text:
            incident.setdefault(pat.o.text, []).append((i, pat.s.text, False))

    core = core_vertex(scores)
    root = TreeNode(terms[core])
    tree = RedistributionTree(root)
    used: set[int] = set()
    visited = {core}
    pending: set[str] = set()
    counter = itertools.count()
    heap: list[tuple[float, str, str, int, TreeNode]] = []

    def attach(parent_node: TreeNode, eid: int, nbr: str, outgoing: bool) -> TreeNode:
        used.add(eid)
        child = TreeNode(terms[nbr])
        parent_node.edges.append(
            TreeEdge(q.patterns[eid].p, child, outgoing, eid)
        )
        return child

    def push(node: TreeNode, nbr: str, eid: int) -> None:
        pred = q.patterns[eid].p.text
        heapq.heappush(heap, (-scores.get(nbr, NEG_INF), pred, nbr, next(counter), node))

    for eid, nbr, outgoing in sorted(incident.get(core, ())):
        if eid in used:
            continue
        if nbr in visited:  # self loop or parallel edge back to the core
            attach(root, eid, nbr, outgoing)
            continue
        child = attach(root, eid, nbr, outgoing)
        pending.add(nbr)
        push(child, nbr, eid)

    while heap:
        _, _, vertex, _, node = heapq.heappop(heap)
        if vertex in visited:
            continue
        visited.add(vertex)
        pending.discard(vertex)
        for eid, nbr, outgoing in incident.get(vertex, ()):
            if eid in used:
                continue
            if nbr not in visited and nbr not in pending:
                child = attach(node, eid, nbr, outgoing)
                pending.add(nbr)
                push(child, nbr, eid)
            else:
                attach(node, eid, nbr, outgoing)  # duplicated leaf
    if len(used) != len(q.patterns):
        raise UntreeableQuery(
            f"{len(q.patterns) - len(used)} pattern(s) reachable only "
            "through predicate variables"
        )
    return tree


# ---------------------------------------------------------------------------
# Boyer-Moore majority vote


def boyer_moore_candidate(items: Iterable[str]) -> Optional[str]:
    """Single-pass majority-vote candidate; must be verified by a count."""
    candidate: Optional[str] = None
    count = 0
    for item in items:
        if count == 0:
            candidate, count = item, 1
        elif item == candidate:
            count += 1
        else:
            count -= 1
    return candidate


def dominant_constant(constants: Counter, total: int) -> Optional[str]:
    """The constant to substitute for a template variable: the majority-vote
    candidate, kept only when it is a strict majority of all ``total``
    instances (instances without a constant count against it)."""
    if not constants or total <= 0:
        return None
    candidate = boyer_moore_candidate(
        itertools.chain.from_iterable([c] * n for c, n in constants.items())
    )
    if candidate is not None and 2 * constants[candidate] > total:
        return candidate
    return None


# ---------------------------------------------------------------------------
# Heat map


@dataclass
class HeatEdge:
    key: tuple[str, str]
    count: int = 0
    child_constants: Counter = field(default_factory=Counter)
    root_constants: Counter = field(default_factory=Counter)  # first level only
    child: "HeatNode" = None  # type: ignore[assignment]


@dataclass
class HeatNode:
    edges: dict[tuple[str, str], HeatEdge] = field(default_factory=dict)


class HeatMap:
    """Prefix tree of query tree templates with per-edge frequencies and
    per-vertex constant metadata. Counts only grow during a session."""

    def __init__(self):
        self.root = HeatNode()

    def record(self, tree: RedistributionTree) -> None:
        root_const = None if tree.root.term.is_variable else tree.root.term.text

        def insert(heat_node: HeatNode, tree_node: TreeNode, depth: int) -> None:
            for e in tree_node.edges:
                he = heat_node.edges.get(e.key)
                if he is None:
                    he = HeatEdge(e.key, child=HeatNode())
                    heat_node.edges[e.key] = he
                he.count += 1
                if not e.child.term.is_variable:
                    he.child_constants[e.child.term.text] += 1
                if depth == 0 and root_const is not None:
                    he.root_constants[root_const] += 1
                insert(he.child, e.child, depth + 1)

        insert(self.root, tree.root, 0)

    def hot_tree(self, threshold: int) -> Optional[RedistributionTree]:
        """The maximal rooted subtree all of whose edge counts reach the
        threshold, with template variables replaced by dominating constants
        where one holds a strict majority."""
        hot_first = [e for e in self.root.edges.values() if e.count >= threshold]
        if not hot_first:
            return None

        names = (f"?h{i}" for i in itertools.count())
        root_consts: Counter = Counter()
        total_first = 0
        for e in hot_first:
            root_consts += e.root_constants
            total_first += e.count
        root_c = dominant_constant(root_consts, total_first)
        root = TreeNode(Term(root_c if root_c is not None else next(names)))

        def expand(node: TreeNode, heat_node: HeatNode, edges: list[HeatEdge]) -> None:
            for he in edges:
                pred, direction = he.key
                pred_term = Term(pred if pred != "?" else next(names))
                child_c = dominant_constant(he.child_constants, he.count)
                child = TreeNode(Term(child_c if child_c is not None else next(names)))
                node.edges.append(TreeEdge(pred_term, child, direction == "out"))
                expand(
                    child,
                    he.child,
                    [c for c in he.child.edges.values() if c.count >= threshold],
                )

        expand(root, self.root, hot_first)
        return RedistributionTree(root)


# ---------------------------------------------------------------------------
# Pattern index

PIKey = tuple[str, str, Optional[str]]  # (predicate, direction, child constant)
PIPath = tuple[PIKey, ...]


@dataclass
class PatternIndexEdge:
    key: PIKey
    last_access: int
    root_constant: Optional[str] = None  # first level only
    child: "PatternIndexNode" = None  # type: ignore[assignment]

    @property
    def core_subject(self) -> bool:
        """First-level edges whose subject is the core own no replica storage:
        the initial subject-hash placement already serves them locally."""
        return self.key[1] == "out"


@dataclass
class PatternIndexNode:
    edges: dict[PIKey, PatternIndexEdge] = field(default_factory=dict)


class PatternIndex:
    """The subset of the heat map materialized by completed redistribution
    runs. Containment of a query's redistribution tree authorizes
    parallel-mode execution."""

    def __init__(self):
        self.root = PatternIndexNode()

    def iter_edges(self) -> Iterator[tuple[PIPath, PatternIndexEdge, int]]:
        def walk(node: PatternIndexNode, path: PIPath, depth: int):
            for key, e in node.edges.items():
                yield path + (key,), e, depth
                yield from walk(e.child, path + (key,), depth + 1)

        yield from walk(self.root, (), 0)

    def get(self, path: PIPath) -> Optional[PatternIndexEdge]:
        node = self.root
        edge = None
        for key in path:
            edge = node.edges.get(key)
            if edge is None:
                return None
            node = edge.child
        return edge

    def ensure(
        self, path: PIPath, clock: int, root_constant: Optional[str]
    ) -> PatternIndexEdge:
        node = self.root
        edge = None
        for depth, key in enumerate(path):
            edge = node.edges.get(key)
            if edge is None:
                edge = PatternIndexEdge(
                    key, clock, root_constant if depth == 0 else None,
                    PatternIndexNode(),
                )
                node.edges[key] = edge
            node = edge.child
        assert edge is not None
        return edge

    def remove(self, path: PIPath) -> list[PIPath]:
        """Drop an edge with its whole descendant subtree; children are
        meaningless without their parents. Returns the removed paths."""
        node = self.root
        for key in path[:-1]:
            edge = node.edges.get(key)
            if edge is None:
                return []
            node = edge.child
        edge = node.edges.pop(path[-1], None)
        if edge is None:
            return []
        removed = [path]
        removed.extend(path + sub for sub, _, _ in _subtree_paths(edge.child))
        return removed

    def lru_path(self, protected: set[PIPath] = frozenset()) -> Optional[PIPath]:
        """The least-recently-accessed evictable edge. Paths in ``protected``
        (and hence their descendants, which eviction would remove with them)
        are never candidates."""
        best: Optional[tuple[int, PIPath]] = None
        for path, edge, _ in self.iter_edges():
            if path in protected:
                continue
            if best is None or (edge.last_access, path) < best:
                best = (edge.last_access, path)
        return best[1] if best else None

    def dump(self) -> str:
        lines: list[str] = []
        for path, edge, depth in self.iter_edges():
            pred, direction, const = edge.key
            arrow = "->" if direction == "out" else "<-"
            target = const if const is not None else "?"
            extra = f" [root={edge.root_constant}]" if edge.root_constant else ""
            lines.append(
                "  " * depth
                + f"{arrow} {pred} {target} (last_access={edge.last_access}){extra}"
            )
        return "\n".join(lines) if lines else "(empty)"


def _subtree_paths(node: PatternIndexNode) -> Iterator[tuple[PIPath, PatternIndexEdge, int]]:
    def walk(n: PatternIndexNode, path: PIPath, depth: int):
        for key, e in n.edges.items():
            yield path + (key,), e, depth
            yield from walk(e.child, path + (key,), depth + 1)

    yield from walk(node, (), 0)


def _pi_key(edge: TreeEdge) -> PIKey:
    pred, direction = edge.key
    child_const = None if edge.child.term.is_variable else edge.child.term.text
    return (pred, direction, child_const)


def _compatible_keys(
    node: PatternIndexNode, edge: TreeEdge
) -> list[PIKey]:
    """Pattern-index edges a query tree edge may evaluate against, most
    specific first. A constant query predicate matches the same predicate or
    a variable-predicate module; a constant child matches the same constant
    or a variable child."""
    pred, direction = edge.key
    child_const = None if edge.child.term.is_variable else edge.child.term.text
    preds = [pred] if pred != "?" else ["?"]
    if pred != "?":
        preds.append("?")
    consts: list[Optional[str]] = [child_const] if child_const is None else [child_const, None]
    out = []
    for p in preds:
        for c in consts:
            key = (p, direction, c)
            if key in node.edges:
                out.append(key)
    return out


def match_pattern_index(
    tree: RedistributionTree, pi: PatternIndex, clock: int, touch: bool = True
) -> Optional[dict[int, Optional[PIPath]]]:
    """Map each query pattern to the pattern-index path whose replica module
    serves it (None for core-subject edges served by the main index).
    Returns None unless every edge of the tree is contained; on success all
    touched edges are time-stamped with ``clock``."""
    root_const = None if tree.root.term.is_variable else tree.root.term.text
    mapping: dict[int, Optional[PIPath]] = {}
    touched: list[PatternIndexEdge] = []

    def descend(tree_node: TreeNode, pi_node: PatternIndexNode, path: PIPath, depth: int) -> bool:
        for e in tree_node.edges:
            matched = False
            for key in _compatible_keys(pi_node, e):
                pi_edge = pi_node.edges[key]
                if depth == 0 and pi_edge.root_constant is not None:
                    if root_const != pi_edge.root_constant:
                        continue
                sub_path = path + (key,)
                if descend(e.child, pi_edge.child, sub_path, depth + 1):
                    if e.pattern_index is not None:
                        mapping[e.pattern_index] = (
                            None if depth == 0 and pi_edge.core_subject else sub_path
                        )
                    touched.append(pi_edge)
                    matched = True
                    break
            if not matched:
                return False
        return True

    if not descend(tree.root, pi.root, (), 0):
        return None
    if touch:
        for e in touched:
            e.last_access = clock
    return mapping


# ---------------------------------------------------------------------------
# Incremental redistribution


@dataclass
class EvictionRecord:
    epoch: int
    pattern: str
    triples_freed: int


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class RedistributionController:
    """Owns the heat map, pattern index, and replication budget bookkeeping."""

    budget_per_worker: float  # triples per worker; inf disables the cap
    heat: HeatMap = field(default_factory=HeatMap)
    pattern_index: PatternIndex = field(default_factory=PatternIndex)
    eviction_log: list[EvictionRecord] = field(default_factory=list)
    skipped_patterns: list[str] = field(default_factory=list)
    # hot trees that failed the budget, keyed by their edge-path signature;
    # retrying is pointless until the pattern index changes shape again
    _failed: set[frozenset] = field(default_factory=set)
    _pi_version: int = 0

    def record_query(
        self, tree: RedistributionTree, threshold: int
    ) -> Optional[RedistributionTree]:
        """Fold a query's tree into the heat map; return the current hot
        template tree, if any subtree has reached the threshold."""
        self.heat.record(tree)
        return self.heat.hot_tree(threshold)

    def redistribute(
        self, hot: RedistributionTree, cluster: Cluster, clock: int
    ) -> bool:
        """Run incremental redistribution for a hot tree: hash-place the
        core-adjacent level by core binding, then collocate each deeper level
        with its parents via semi-joins into replica modules. Already
        materialized edges are skipped. Returns False when the pattern cannot
        fit the budget even after evicting everything else."""
        signature = frozenset(
            (self._pi_version, _pi_key(e), depth)
            for _, e, depth in hot.iter_edges()
        )
        if signature in self._failed:
            return False
        inserts, new_paths, all_paths = self._plan_inserts(hot, cluster)
        protected = {p[:i] for p in all_paths for i in range(1, len(p) + 1)}
        if not self._fit_budget(inserts, cluster, clock, protected):
            self._failed.add(signature)
            return False
        self._pi_version += 1
        self._failed.clear()
        root_const = None if hot.root.term.is_variable else hot.root.term.text
        for path in new_paths:
            self.pattern_index.ensure(path, clock, root_const)
        for (wid, path), triples in inserts.items():
            module = cluster.workers[wid].replicas.setdefault(path, WorkerStore())
            for t in triples:
                module.insert(t)
        return True

    # -- internals --

    def _plan_inserts(
        self, hot: RedistributionTree, cluster: Cluster
    ) -> tuple[
        dict[tuple[int, PIPath], set[EncodedTriple]], list[PIPath], list[PIPath]
    ]:
        n = cluster.num_workers
        inserts: dict[tuple[int, PIPath], set[EncodedTriple]] = {}
        new_paths: list[PIPath] = []
        all_paths: list[PIPath] = []

        def resolve_term(term: Term) -> Optional[object]:
            if term.is_variable:
                return term.text
            return cluster.dictionary.lookup(term.text)

        def edge_pattern(parent: TreeNode, e: TreeEdge) -> Optional[ResolvedPattern]:
            pat = (
                (parent.term, e.predicate, e.child.term)
                if e.subject_is_parent
                else (e.child.term, e.predicate, parent.term)
            )
            slots = [resolve_term(t) for t in pat]
            if any(s is None for s in slots):
                return None  # constant unknown to the dictionary: no matches
            return ResolvedPattern(*slots)

        def descend(
            parent: TreeNode,
            e: TreeEdge,
            path: PIPath,
            parent_bindings: Optional[list[set[TermId]]],
        ) -> None:
            """``parent_bindings[w]`` are the parent-vertex values already
            placed at worker w (None at the first level)."""
            key = _pi_key(e)
            sub_path = path + (key,)
            all_paths.append(sub_path)
            rp = edge_pattern(parent, e)
            materialized = self.pattern_index.get(sub_path) is not None
            first_level = parent_bindings is None
            core_subject = first_level and e.subject_is_parent

            per_worker: list[set[EncodedTriple]] = [set() for _ in range(n)]
            if rp is not None:
                if core_subject:
                    # Served by the main index; placement is already by subject
                    # hash, so nothing is replicated for this edge.
                    for w in cluster.workers:
                        per_worker[w.wid] = _matching_triples(w.store, rp)
                elif first_level:
                    # Core is the object here: route every matching triple in
                    # the cluster by the hash of its core (object) binding.
                    for w in cluster.workers:
                        for t in _matching_triples(w.store, rp):
                            per_worker[cluster.cfg.worker_of(t.o)].add(t)
                else:
                    # Deeper level: ship candidates matching the local parent
                    # bindings, a distributed semi-join per receiving worker.
                    join_col = "s" if e.subject_is_parent else "o"
                    for r in range(n):
                        values = parent_bindings[r]
                        if not values:
                            continue
                        for sender in cluster.workers:
                            per_worker[r] |= _semi_join_triples(
                                sender.store, rp, join_col, values
                            )

            if not materialized and not core_subject:
                new_paths.append(sub_path)
                for wid in range(n):
                    if per_worker[wid]:
                        inserts[(wid, sub_path)] = per_worker[wid]
            elif not materialized and core_subject:
                new_paths.append(sub_path)

            # Bindings the children collocate with: the propagating column is
            # the end opposite this edge's source column.
            child_is_object = e.subject_is_parent
            if materialized and not core_subject:
                stored = [
                    cluster.workers[w].replicas.get(sub_path, WorkerStore())
                    for w in range(n)
                ]
                triple_sets = [set(s.triples()) for s in stored]
            else:
                triple_sets = per_worker
            child_bindings = [
                {(t.o if child_is_object else t.s) for t in triple_sets[w]}
                for w in range(n)
            ]
            for sub in e.child.edges:
                descend(e.child, sub, sub_path, child_bindings)

        for e in hot.root.edges:
            descend(hot.root, e, (), None)
        return inserts, new_paths, all_paths

    def _fit_budget(
        self,
        inserts: dict[tuple[int, PIPath], set[EncodedTriple]],
        cluster: Cluster,
        clock: int,
        protected: set[PIPath] = frozenset(),
    ) -> bool:
        if math.isinf(self.budget_per_worker):
            return True
        additions = [0] * cluster.num_workers
        for (wid, path), triples in inserts.items():
            existing = cluster.workers[wid].replicas.get(path)
            if existing is None:
                additions[wid] += len(triples)
            else:
                additions[wid] += sum(1 for t in triples if t not in existing)
        if max(additions, default=0) > self.budget_per_worker:
            self._note_skip(_describe_paths(inserts))
            return False

        def over_budget() -> bool:
            return any(
                cluster.workers[w].replica_count() + additions[w]
                > self.budget_per_worker
                for w in range(cluster.num_workers)
            )

        while over_budget():
            victim = self.pattern_index.lru_path(protected)
            if victim is None:
                self._note_skip(_describe_paths(inserts))
                return False
            self.evict_subtree(victim, cluster, clock)
        return True

    def _note_skip(self, description: str) -> None:
        if description not in self.skipped_patterns:
            self.skipped_patterns.append(description)

    def evict_subtree(self, path: PIPath, cluster: Cluster, clock: int) -> None:
        removed = self.pattern_index.remove(path)
        freed = 0
        for w in cluster.workers:
            for r in removed:
                module = w.replicas.pop(r, None)
                if module is not None:
                    freed += len(module)
        self.eviction_log.append(EvictionRecord(clock, _path_str(path), freed))


def _matching_triples(store: WorkerStore, rp: ResolvedPattern) -> set[EncodedTriple]:
    out: set[EncodedTriple] = set()
    preds = [rp.p] if isinstance(rp.p, int) else list(store.predicates())
    for p in preds:
        if isinstance(rp.s, int):
            for o in store.lookup_ps(rp.s, p):
                if not isinstance(rp.o, int) or rp.o == o:
                    out.add(EncodedTriple(rp.s, p, o))
        elif isinstance(rp.o, int):
            for s in store.lookup_po(rp.o, p):
                out.add(EncodedTriple(s, p, rp.o))
        else:
            for s, o in store.scan(p):
                if isinstance(rp.s, str) and rp.s == rp.o and s != o:
                    continue
                out.add(EncodedTriple(s, p, o))
    return out


def _semi_join_triples(
    store: WorkerStore, rp: ResolvedPattern, join_col: str, values: set[TermId]
) -> set[EncodedTriple]:
    out: set[EncodedTriple] = set()
    preds = [rp.p] if isinstance(rp.p, int) else list(store.predicates())
    for p in preds:
        if join_col == "s":
            for v in values:
                for o in store.lookup_ps(v, p):
                    if not isinstance(rp.o, int) or rp.o == o:
                        out.add(EncodedTriple(v, p, o))
        else:
            for v in values:
                for s in store.lookup_po(v, p):
                    if not isinstance(rp.s, int) or rp.s == s:
                        out.add(EncodedTriple(s, p, v))
    return out


def _path_str(path: PIPath) -> str:
    return "/".join(
        f"{pred}{'>' if direction == 'out' else '<'}{const or '?'}"
        for pred, direction, const in path
    )


def _describe_paths(inserts: dict[tuple[int, PIPath], set[EncodedTriple]]) -> str:
    paths = sorted({_path_str(p) for (_, p) in inserts})
    return ";".join(paths) if paths else "(empty)"
