"""Workload monitoring, redistribution trees, and incremental replication."""

from __future__ import annotations

import math
import random
from collections import Counter

import pytest

from adhash.adaptivity import (
    NEG_INF,
    HeatMap,
    PatternIndex,
    RedistributionController,
    RedistributionTree,
    TreeEdge,
    TreeNode,
    UntreeableQuery,
    boyer_moore_candidate,
    build_redistribution_tree,
    chauvenet_outliers,
    dominant_constant,
    match_pattern_index,
    score_vertices,
)
from adhash.engine import Engine, RunConfig
from adhash.query import Term, parse_query
from adhash.storage import PredicateEntry, PredicateStats

from conftest import (
    ACADEMIC,
    engine_from_triples,
    ex,
    oracle,
    random_graph,
    random_query,
)


def make_stats(entries: dict[str, PredicateEntry]):
    """Stats keyed by predicate text, with a resolver closure."""
    names = sorted(entries)
    ids = {name: i for i, name in enumerate(names)}
    stats = PredicateStats({ids[n]: entries[n] for n in names})
    return stats, lambda text: ids.get(text)


# ---------------------------------------------------------------------------
# Chauvenet filtering and scoring


def test_chauvenet_uniform_population_keeps_everything():
    assert chauvenet_outliers({i: 3.0 for i in range(10)}) == set()


def test_chauvenet_flags_extreme_member():
    scores = {i: 1.0 for i in range(10)}
    scores["hub"] = 50.0
    assert chauvenet_outliers(scores) == {"hub"}


def test_chauvenet_matches_direct_formula():
    rng = random.Random(1)
    scores = {i: rng.uniform(0, 10) for i in range(30)}
    n = len(scores)
    mu = sum(scores.values()) / n
    sigma = math.sqrt(sum((v - mu) ** 2 for v in scores.values()) / n)
    expected = {
        k
        for k, v in scores.items()
        if n * math.erfc(abs(v - mu) / (sigma * math.sqrt(2))) / 2 < 0.5
    }
    assert chauvenet_outliers(scores) == expected


def test_single_edge_scores_are_the_predicate_averages():
    stats, resolve = make_stats(
        {"<p>": PredicateEntry(subject_score=4.0, object_score=7.0)}
    )
    q = parse_query("SELECT ?a WHERE { ?a <p> ?b }")
    scores = score_vertices(q, stats, resolve)
    assert scores["?a"] == 4.0
    assert scores["?b"] == 7.0


def test_vertex_score_is_max_over_incident_edges():
    stats, resolve = make_stats(
        {
            "<p>": PredicateEntry(subject_score=2.0, object_score=5.0),
            "<q>": PredicateEntry(subject_score=9.0, object_score=1.0),
        }
    )
    q = parse_query("SELECT ?b WHERE { ?a <p> ?b . ?b <q> ?c }")
    scores = score_vertices(q, stats, resolve)
    assert scores["?b"] == 9.0  # max(object of p = 5, subject of q = 9)


def test_outlier_predicate_contributes_negative_infinity():
    entries = {f"<p{i}>": PredicateEntry(subject_score=1.0, object_score=1.0)
               for i in range(10)}
    entries["<hub>"] = PredicateEntry(subject_score=99.0, object_score=99.0)
    stats, resolve = make_stats(entries)
    q = parse_query("SELECT ?a WHERE { ?a <hub> ?b }")
    scores = score_vertices(q, stats, resolve)
    assert scores["?a"] == NEG_INF
    assert scores["?b"] == NEG_INF


def test_no_outliers_means_filter_is_identity():
    entries = {f"<p{i}>": PredicateEntry(subject_score=3.0, object_score=4.0)
               for i in range(6)}
    stats, resolve = make_stats(entries)
    q = parse_query("SELECT ?a WHERE { ?a <p0> ?b . ?b <p1> ?c }")
    scores = score_vertices(q, stats, resolve)
    assert scores == {"?a": 3.0, "?b": 4.0, "?c": 4.0}


# ---------------------------------------------------------------------------
# Redistribution trees

CYCLE_QUERY = (
    "SELECT ?stud WHERE { "
    "?stud ex:advisor ?prof . "
    "?stud ex:uGradFrom ?univ . "
    "?prof ex:gradFrom ?univ }"
)


def edges_of(tree: RedistributionTree):
    return [
        (parent.term.text, e.predicate.text, e.child.term.text, e.subject_is_parent)
        for parent, e, _ in tree.iter_edges()
    ]


def test_cyclic_query_becomes_tree_with_duplicated_leaf():
    q = parse_query(CYCLE_QUERY)
    scores = {"?univ": 9.0, "?prof": 5.0, "?stud": 3.0}
    tree = build_redistribution_tree(q, scores)
    assert tree.root.term.text == "?univ"
    # two children under the root, both incoming edges
    root_edges = {(e.predicate.text, e.child.term.text) for e in tree.root.edges}
    assert root_edges == {
        (ex("gradFrom"), "?prof"),
        (ex("uGradFrom"), "?stud"),
    }
    assert all(not e.subject_is_parent for e in tree.root.edges)
    # the higher-scored ?prof expands first and captures the cycle edge as a
    # duplicated ?stud leaf
    prof_node = next(
        e.child for e in tree.root.edges if e.child.term.text == "?prof"
    )
    assert [(e.predicate.text, e.child.term.text) for e in prof_node.edges] == [
        (ex("advisor"), "?stud")
    ]
    stud_node = next(
        e.child for e in tree.root.edges if e.child.term.text == "?stud"
    )
    assert stud_node.edges == []
    assert tree.edge_count() == 3


def test_star_query_tree_is_the_star():
    q = parse_query("SELECT ?s WHERE { ?s ex:a ?x . ?s ex:b ?y . ?s ex:c ex:K }")
    tree = build_redistribution_tree(q, {"?s": 5.0, "?x": 1.0, "?y": 1.0, ex("K"): 1.0})
    assert tree.root.term.text == "?s"
    assert len(tree.root.edges) == 3
    assert all(e.subject_is_parent for e in tree.root.edges)
    assert all(e.child.edges == [] for e in tree.root.edges)


def test_tree_spans_every_edge_exactly_once_on_random_queries():
    rng = random.Random(9)
    triples = random_graph(rng, 150, 5)
    for _ in range(50):
        q = random_query(rng, triples, rng.randint(2, 5))
        scores = {t: rng.uniform(0, 10)
                  for p in q.patterns for t in (p.s.text, p.o.text)}
        try:
            tree = build_redistribution_tree(q, scores)
        except UntreeableQuery:
            # only legitimate when some pattern touches the rest exclusively
            # through a predicate variable
            assert any(
                p.p.is_variable and p.p.text not in {p.s.text, p.o.text}
                for p in q.patterns
            )
            continue
        got = sorted(e.pattern_index for _, e, _ in tree.iter_edges())
        assert got == list(range(len(q.patterns)))
        root_score = scores[tree.root.term.text]
        assert all(root_score >= s for s in scores.values())


def test_self_loop_becomes_duplicated_leaf():
    q = parse_query("SELECT ?a WHERE { ?a ex:p ?a }")
    tree = build_redistribution_tree(q, {"?a": 1.0})
    assert tree.edge_count() == 1
    (parent, edge, _), = tree.iter_edges()
    assert parent.term.text == edge.child.term.text == "?a"


# ---------------------------------------------------------------------------
# Majority vote


def test_boyer_moore_candidate():
    assert boyer_moore_candidate(["A", "A", "B"]) == "A"
    assert boyer_moore_candidate(["A", "B", "A", "C", "A"]) == "A"


def test_dominant_constant_requires_strict_majority():
    assert dominant_constant(Counter({"A": 2, "B": 1}), 3) == "A"
    assert dominant_constant(Counter({"A": 1, "B": 1, "C": 1}), 3) is None
    assert dominant_constant(Counter({"A": 2}), 4) is None  # half is not enough
    assert dominant_constant(Counter(), 5) is None


def test_majority_vote_substitution_thresholds():
    # a constant seen once in three instances stays variable; a constant seen
    # in every one of two instances substitutes
    assert dominant_constant(Counter({ex("MIT"): 1}), 3) is None
    assert dominant_constant(Counter({ex("Grad"): 2}), 2) == ex("Grad")


# ---------------------------------------------------------------------------
# Heat map


def leaf(term: str) -> TreeNode:
    return TreeNode(Term(term))


def chain_tree(root: str, *hops) -> RedistributionTree:
    """hops: (predicate, child, subject_is_parent) chained depth-first."""
    root_node = TreeNode(Term(root))
    node = root_node
    for pred, child, out in hops:
        nxt = TreeNode(Term(child))
        node.edges.append(TreeEdge(Term(pred), nxt, out))
        node = nxt
    return RedistributionTree(root_node)


def test_heat_map_merges_templates_and_counts():
    heat = HeatMap()
    # one instance with a constant root, two with a deeper constant child
    heat.record(chain_tree(ex("MIT"), (ex("uGradFrom"), "?s", False)))
    heat.record(
        chain_tree("?u", (ex("uGradFrom"), "?s", False), (ex("type"), ex("Grad"), True))
    )
    heat.record(
        chain_tree("?u", (ex("uGradFrom"), "?s", False), (ex("type"), ex("Grad"), True))
    )
    first = heat.root.edges[(ex("uGradFrom"), "in")]
    assert first.count == 3
    assert first.root_constants == Counter({ex("MIT"): 1})
    deeper = first.child.edges[(ex("type"), "out")]
    assert deeper.count == 2
    assert deeper.child_constants == Counter({ex("Grad"): 2})


def test_hot_tree_substitutes_only_strict_majorities():
    heat = HeatMap()
    heat.record(chain_tree(ex("MIT"), (ex("uGradFrom"), "?s", False)))
    heat.record(
        chain_tree("?u", (ex("uGradFrom"), "?s", False), (ex("type"), ex("Grad"), True))
    )
    heat.record(
        chain_tree("?u", (ex("uGradFrom"), "?s", False), (ex("type"), ex("Grad"), True))
    )
    hot = heat.hot_tree(2)
    assert hot is not None
    assert hot.root.term.is_variable  # MIT held 1 of 3: stays a variable
    (e1,) = hot.root.edges
    assert e1.predicate.text == ex("uGradFrom") and not e1.subject_is_parent
    (e2,) = e1.child.edges
    assert e2.predicate.text == ex("type") and e2.subject_is_parent
    assert e2.child.term.text == ex("Grad")  # 2 of 2: substitutes


def test_hot_tree_threshold_prunes_cold_subtrees():
    heat = HeatMap()
    heat.record(
        chain_tree("?u", (ex("a"), "?x", False), (ex("b"), "?y", True))
    )
    heat.record(chain_tree("?u", (ex("a"), "?x", False)))
    hot = heat.hot_tree(2)
    assert hot is not None
    (e1,) = hot.root.edges
    assert e1.predicate.text == ex("a")
    assert e1.child.edges == []  # the b-edge saw only one instance
    assert heat.hot_tree(3) is None


def test_threshold_one_fires_immediately():
    heat = HeatMap()
    heat.record(chain_tree("?u", (ex("a"), "?x", True)))
    assert heat.hot_tree(1) is not None


# ---------------------------------------------------------------------------
# Pattern index


def test_pattern_index_ensure_get_remove():
    pi = PatternIndex()
    path = ((ex("p"), "in", None), (ex("q"), "out", None))
    pi.ensure(path, clock=3, root_constant=None)
    assert pi.get(path) is not None
    assert pi.get(path[:1]) is not None
    removed = pi.remove(path[:1])
    assert set(removed) == {path[:1], path}
    assert pi.get(path[:1]) is None


def test_pattern_index_lru_respects_protection():
    pi = PatternIndex()
    a = ((ex("a"), "in", None),)
    b = ((ex("b"), "in", None),)
    pi.ensure(a, clock=1, root_constant=None)
    pi.ensure(b, clock=2, root_constant=None)
    assert pi.lru_path() == a
    assert pi.lru_path(protected={a}) == b
    assert pi.lru_path(protected={a, b}) is None


def test_match_updates_timestamps_and_requires_full_containment():
    pi = PatternIndex()
    pi.ensure(((ex("p"), "in", None),), clock=1, root_constant=None)
    contained = chain_tree("?u", (ex("p"), "?s", False))
    missing = chain_tree("?u", (ex("p"), "?s", False), (ex("q"), "?t", True))
    assert match_pattern_index(contained, pi, clock=9) is not None
    assert pi.get(((ex("p"), "in", None),)).last_access == 9
    assert match_pattern_index(missing, pi, clock=10) is None
    assert match_pattern_index(contained, pi, clock=11, touch=False) is not None
    assert pi.get(((ex("p"), "in", None),)).last_access == 9


def test_match_respects_constant_compatibility():
    pi = PatternIndex()
    pi.ensure(((ex("p"), "in", None),), clock=1, root_constant=ex("OnlyRoot"))
    # a variable-rooted query cannot use data replicated for one root constant
    assert match_pattern_index(chain_tree("?u", (ex("p"), "?s", False)), pi, 2) is None
    assert (
        match_pattern_index(chain_tree(ex("OnlyRoot"), (ex("p"), "?s", False)), pi, 2)
        is not None
    )
    # constant-rooted queries can always use variable-rooted modules
    pi2 = PatternIndex()
    pi2.ensure(((ex("p"), "in", None),), clock=1, root_constant=None)
    assert (
        match_pattern_index(chain_tree(ex("MIT"), (ex("p"), "?s", False)), pi2, 2)
        is not None
    )


def test_containment_is_monotone_under_inserts():
    rng = random.Random(13)
    pi = PatternIndex()
    tree = chain_tree("?u", (ex("p"), "?s", False), (ex("q"), "?t", True))
    assert match_pattern_index(tree, pi, 1) is None
    pi.ensure(((ex("p"), "in", None),), clock=1, root_constant=None)
    assert match_pattern_index(tree, pi, 2) is None
    pi.ensure(
        ((ex("p"), "in", None), (ex("q"), "out", None)), clock=2, root_constant=None
    )
    assert match_pattern_index(tree, pi, 3) is not None
    # adding unrelated patterns never breaks containment
    for i in range(10):
        pi.ensure(((ex(f"r{i}"), "out", None),), clock=3 + i, root_constant=None)
        assert match_pattern_index(tree, pi, 20 + i) is not None


# ---------------------------------------------------------------------------
# Incremental redistribution


def engine_with_budget(triples, budget_triples: float, workers: int = 2) -> Engine:
    engine = engine_from_triples(
        triples, RunConfig(num_workers=workers, adaptive=True, frequency_threshold=10)
    )
    engine.controller.budget_per_worker = budget_triples
    return engine


def chain_data():
    return [
        (ex("s1"), ex("follows"), ex("m1")),
        (ex("s2"), ex("follows"), ex("m1")),
        (ex("s3"), ex("follows"), ex("m2")),
        (ex("m1"), ex("reports"), ex("boss1")),
        (ex("m2"), ex("reports"), ex("boss2")),
    ]


def test_ird_places_triples_by_core_hash_and_semijoin():
    engine = engine_with_budget(chain_data(), budget_triples=float("inf"))
    cluster = engine.cluster
    # core ?m: follows triples come in, reports go out
    tree = chain_tree("?m", (ex("follows"), "?s", False))
    tree.root.edges.append(TreeEdge(Term(ex("reports")), leaf("?b"), True))
    ok = engine.controller.redistribute(tree, cluster, clock=1)
    assert ok
    d = cluster.dictionary
    follows_path = ((ex("follows"), "in", None),)
    for w in cluster.workers:
        module = w.replicas.get(follows_path)
        if module is None:
            continue
        for t in module.triples():
            assert cluster.cfg.worker_of(t.o) == w.wid  # routed by core binding
    total = sum(
        len(w.replicas.get(follows_path, [])) for w in cluster.workers
    )
    assert total == 3
    # core-subject edge holds no replicas
    assert all(
        ((ex("reports"), "out", None),) not in w.replicas for w in cluster.workers
    )


def test_ird_then_parallel_equals_oracle():
    triples = chain_data()
    engine = engine_with_budget(triples, budget_triples=float("inf"))
    q = parse_query(
        "SELECT ?s ?b WHERE { ?s ex:follows ?m . ?m ex:reports ?b }"
    )
    baseline = engine.execute(q)
    assert baseline.mode == "distributed"
    tree = engine._tree_for(q)
    ok = engine.controller.redistribute(tree, engine.cluster, clock=2)
    assert ok
    replayed = engine.execute(q)
    assert replayed.mode == "parallel"
    assert replayed.payload_rows == 0
    assert replayed.rows == baseline.rows == oracle(triples, q)


def test_ird_skips_materialized_edges():
    engine = engine_with_budget(chain_data(), budget_triples=float("inf"))
    tree = chain_tree("?m", (ex("follows"), "?s", False))
    assert engine.controller.redistribute(tree, engine.cluster, clock=1)
    before = [dict(w.replicas) for w in engine.cluster.workers]
    # extend the same pattern: the follows level must not be re-planned
    deeper = chain_tree("?m", (ex("follows"), "?s", False))
    assert engine.controller.redistribute(deeper, engine.cluster, clock=2)
    after = [dict(w.replicas) for w in engine.cluster.workers]
    assert before == after


def test_budget_eviction_is_lru():
    engine = engine_with_budget(chain_data(), budget_triples=2.0)
    ctrl = engine.controller
    tree_a = chain_tree("?m", (ex("follows"), "?s", False))
    tree_b = chain_tree("?b", (ex("reports"), "?m", False))
    assert ctrl.redistribute(tree_a, engine.cluster, clock=1)
    assert ctrl.pattern_index.get(((ex("follows"), "in", None),)) is not None
    assert ctrl.redistribute(tree_b, engine.cluster, clock=5)
    # A was least recently used; it gave way to B
    assert ctrl.pattern_index.get(((ex("follows"), "in", None),)) is None
    assert ctrl.pattern_index.get(((ex("reports"), "in", None),)) is not None
    assert len(ctrl.eviction_log) == 1
    assert ctrl.eviction_log[0].epoch == 5
    assert ctrl.eviction_log[0].triples_freed == 3


def test_pattern_exceeding_whole_budget_is_skipped_and_logged():
    engine = engine_with_budget(chain_data(), budget_triples=1.0)
    ctrl = engine.controller
    tree = chain_tree("?m", (ex("follows"), "?s", False))
    assert not ctrl.redistribute(tree, engine.cluster, clock=1)
    assert ctrl.pattern_index.get(((ex("follows"), "in", None),)) is None
    assert all(w.replica_count() == 0 for w in engine.cluster.workers)
    assert len(ctrl.skipped_patterns) == 1


def test_infinite_budget_never_evicts():
    engine = engine_with_budget(chain_data(), budget_triples=float("inf"))
    ctrl = engine.controller
    ctrl.redistribute(chain_tree("?m", (ex("follows"), "?s", False)), engine.cluster, 1)
    ctrl.redistribute(chain_tree("?b", (ex("reports"), "?m", False)), engine.cluster, 2)
    assert ctrl.eviction_log == []


def test_conflicting_replicas_live_in_separate_modules():
    # the same base triple replicated under two patterns occupies two modules
    engine = engine_with_budget(chain_data(), budget_triples=float("inf"))
    ctrl = engine.controller
    ctrl.redistribute(chain_tree("?m", (ex("follows"), "?s", False)), engine.cluster, 1)
    tree2 = chain_tree("?s", (ex("follows"), "?m", True))
    tree2_sub = tree2.root.edges[0]
    tree2_sub.child.edges.append(TreeEdge(Term(ex("reports")), leaf("?b"), True))
    ctrl.redistribute(tree2, engine.cluster, 2)
    paths = {p for w in engine.cluster.workers for p in w.replicas}
    follows_modules = [p for p in paths if p[0][0] == ex("follows")]
    assert len({p[:1] for p in follows_modules}) >= 1
    # modules are per-edge stores; no module is shared across patterns
    for w in engine.cluster.workers:
        assert len(w.replicas) == len(set(w.replicas))
