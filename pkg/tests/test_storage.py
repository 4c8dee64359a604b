"""Worker store indexes and predicate statistics."""

from __future__ import annotations

import random

from adhash.model import Dictionary, EncodedTriple, load_ntriples
from adhash.storage import (
    PredicateEntry,
    WorkerStore,
    aggregate_stats,
    compute_degrees,
    compute_local_stats,
    stats_tsv,
)

from conftest import ACADEMIC, ex


def _academic():
    with open(ACADEMIC) as fh:
        return load_ntriples(fh)


def test_insert_dedup_and_all_three_indexes_agree():
    store = WorkerStore()
    t = EncodedTriple(1, 2, 3)
    store.insert(t)
    store.insert(t)
    assert len(store) == 1
    assert (1, 3) in store.scan(2)
    assert 3 in store.lookup_ps(1, 2)
    assert 1 in store.lookup_po(3, 2)
    assert t in store


def test_index_coherence_random():
    rng = random.Random(7)
    triples = [
        EncodedTriple(rng.randrange(20), rng.randrange(5), rng.randrange(20))
        for _ in range(300)
    ]
    store = WorkerStore(triples)
    assert len(store) == len(set(triples))
    for t in set(triples):
        assert (t.s, t.o) in store.scan(t.p)
        assert t.o in store.lookup_ps(t.s, t.p)
        assert t.s in store.lookup_po(t.o, t.p)
    assert set(store.triples()) == set(triples)


def test_advisor_statistics_on_academic_graph():
    triples, d = _academic()
    store = WorkerStore(triples)
    stats = compute_local_stats(store, compute_degrees(triples))
    advisor = stats.get(d.lookup(ex("advisor")))
    assert advisor.count == 4
    assert advisor.distinct_subjects == 3
    assert advisor.distinct_objects == 2
    assert abs(advisor.subject_score - 8 / 3) < 0.01
    assert advisor.object_score == 5.0
    assert abs(advisor.per_subject - 4 / 3) < 0.01
    assert advisor.per_object == 2.0


def test_single_triple_statistics():
    triples = [EncodedTriple(0, 1, 2)]
    stats = compute_local_stats(WorkerStore(triples), compute_degrees(triples))
    entry = stats.get(1)
    assert entry.count == entry.distinct_subjects == entry.distinct_objects == 1
    assert entry.subject_score == entry.object_score == 1.0


def test_stats_match_brute_force_on_random_graphs():
    rng = random.Random(11)
    for _ in range(10):
        triples = list(
            {
                EncodedTriple(rng.randrange(30), rng.randrange(6), rng.randrange(30))
                for _ in range(rng.randrange(5, 120))
            }
        )
        degrees = compute_degrees(triples)
        stats = compute_local_stats(WorkerStore(triples), degrees)
        by_pred: dict[int, list[EncodedTriple]] = {}
        for t in triples:
            by_pred.setdefault(t.p, []).append(t)
        for p, group in by_pred.items():
            subjects = {t.s for t in group}
            objects = {t.o for t in group}
            e = stats.get(p)
            assert e.count == len(group)
            assert e.distinct_subjects == len(subjects)
            assert e.distinct_objects == len(objects)
            assert abs(e.subject_score - sum(degrees[s] for s in subjects) / len(subjects)) < 1e-9
            assert abs(e.object_score - sum(degrees[o] for o in objects) / len(objects)) < 1e-9
            assert e.count >= max(e.distinct_subjects, e.distinct_objects)
            assert abs(e.per_subject * e.distinct_subjects - e.count) < 1e-9


def test_aggregate_single_partial_is_identity():
    triples, _ = _academic()
    stats = compute_local_stats(WorkerStore(triples), compute_degrees(triples))
    merged = aggregate_stats([stats])
    for p in stats.predicates():
        assert merged.get(p).count == stats.get(p).count
        assert merged.get(p).distinct_subjects == stats.get(p).distinct_subjects
        assert merged.get(p).subject_score == stats.get(p).subject_score


def test_aggregate_subject_side_exact_object_side_upper_bound():
    triples, _ = _academic()
    degrees = compute_degrees(triples)
    exact = compute_local_stats(WorkerStore(triples), degrees)
    # Split by subject parity, mimicking two-worker subject hashing.
    shards = [
        WorkerStore(t for t in triples if t.s % 2 == 0),
        WorkerStore(t for t in triples if t.s % 2 == 1),
    ]
    merged = aggregate_stats([compute_local_stats(s, degrees) for s in shards])
    for p in exact.predicates():
        assert merged.get(p).count == exact.get(p).count
        assert merged.get(p).distinct_subjects == exact.get(p).distinct_subjects
        assert abs(merged.get(p).subject_score - exact.get(p).subject_score) < 1e-9
        # objects may repeat across shards: summed count is an upper bound
        assert merged.get(p).distinct_objects >= exact.get(p).distinct_objects


def test_stats_tsv_shape():
    triples, d = _academic()
    stats = compute_local_stats(WorkerStore(triples), compute_degrees(triples))
    dump = stats_tsv(stats, d.decode)
    lines = dump.splitlines()
    assert len(lines) == 5  # five predicates in the fixture
    assert all(len(line.split("\t")) == 8 for line in lines)


def test_empty_entry_ratios_are_zero():
    e = PredicateEntry()
    assert e.per_subject == 0.0
    assert e.per_object == 0.0
