"""A worker's local triple store and predicate-level statistics.

Triples are primarily hashed by predicate (P-index) and each predicate bucket
is re-partitioned by subject (PS-index) and by object (PO-index). All three
indexes always hold the same triple set; duplicates are stored once.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .model import EncodedTriple, TermId


class WorkerStore:
    """In-memory triple store with P, PS, and PO hash indexes."""

    __slots__ = ("by_predicate", "by_predicate_subject", "by_predicate_object", "_size")

    def __init__(self, triples: Iterable[EncodedTriple] = ()):
        self.by_predicate: dict[TermId, set[tuple[TermId, TermId]]] = {}
        self.by_predicate_subject: dict[tuple[TermId, TermId], set[TermId]] = {}
        self.by_predicate_object: dict[tuple[TermId, TermId], set[TermId]] = {}
        self._size = 0
        for t in triples:
            self.insert(t)

    def insert(self, t: EncodedTriple) -> None:
        bucket = self.by_predicate.setdefault(t.p, set())
        if (t.s, t.o) in bucket:
            return
        bucket.add((t.s, t.o))
        self.by_predicate_subject.setdefault((t.p, t.s), set()).add(t.o)
        self.by_predicate_object.setdefault((t.p, t.o), set()).add(t.s)
        self._size += 1

    def scan(self, p: TermId) -> set[tuple[TermId, TermId]]:
        """All local (s, o) pairs under predicate ``p``."""
        return self.by_predicate.get(p, set())

    def lookup_ps(self, s: TermId, p: TermId) -> set[TermId]:
        """All local objects of ``(s, p, ?)``."""
        return self.by_predicate_subject.get((p, s), set())

    def lookup_po(self, o: TermId, p: TermId) -> set[TermId]:
        """All local subjects of ``(?, p, o)``."""
        return self.by_predicate_object.get((p, o), set())

    def predicates(self) -> Iterable[TermId]:
        return self.by_predicate.keys()

    def triples(self) -> Iterator[EncodedTriple]:
        for p, pairs in self.by_predicate.items():
            for s, o in pairs:
                yield EncodedTriple(s, p, o)

    def __contains__(self, t: EncodedTriple) -> bool:
        return (t.s, t.o) in self.by_predicate.get(t.p, ())

    def __len__(self) -> int:
        return self._size


@dataclass
class PredicateEntry:
    """Statistics for one predicate.

    ``subject_score`` / ``object_score`` are the average degrees
    (in-degree plus out-degree) of the predicate's distinct subjects and
    objects, respectively.
    """

    count: int = 0
    distinct_subjects: int = 0
    distinct_objects: int = 0
    subject_score: float = 0.0
    object_score: float = 0.0

    @property
    def per_subject(self) -> float:
        """Average number of triples with this predicate per unique subject."""
        return self.count / self.distinct_subjects if self.distinct_subjects else 0.0

    @property
    def per_object(self) -> float:
        """Average number of triples with this predicate per unique object."""
        return self.count / self.distinct_objects if self.distinct_objects else 0.0


class PredicateStats:
    """Per-predicate statistics map, local to one worker or aggregated."""

    def __init__(self, entries: dict[TermId, PredicateEntry] | None = None):
        self.entries: dict[TermId, PredicateEntry] = entries or {}

    def get(self, p: TermId) -> PredicateEntry:
        return self.entries.get(p, PredicateEntry())

    def predicates(self) -> Iterable[TermId]:
        return self.entries.keys()

    def total_triples(self) -> int:
        return sum(e.count for e in self.entries.values())

    def __contains__(self, p: TermId) -> bool:
        return p in self.entries


def compute_degrees(triples: Iterable[EncodedTriple]) -> dict[TermId, int]:
    """In-degree plus out-degree of every vertex, over the full dataset.

    Computed once at the master during load: a predicate's subjects or objects
    may have edges residing on other workers, so per-worker degree counts
    would undercount.
    """
    degrees: dict[TermId, int] = {}
    for t in triples:
        degrees[t.s] = degrees.get(t.s, 0) + 1
        degrees[t.o] = degrees.get(t.o, 0) + 1
    return degrees


def compute_local_stats(
    store: WorkerStore, global_degrees: Mapping[TermId, int]
) -> PredicateStats:
    """Full predicate statistics over one worker's local triples."""
    entries: dict[TermId, PredicateEntry] = {}
    for p, pairs in store.by_predicate.items():
        subjects = {s for s, _ in pairs}
        objects = {o for _, o in pairs}
        entries[p] = PredicateEntry(
            count=len(pairs),
            distinct_subjects=len(subjects),
            distinct_objects=len(objects),
            subject_score=sum(global_degrees.get(s, 0) for s in subjects) / len(subjects),
            object_score=sum(global_degrees.get(o, 0) for o in objects) / len(objects),
        )
    return PredicateStats(entries)


def aggregate_stats(partials: list[PredicateStats]) -> PredicateStats:
    """Merge per-worker statistics into global ones.

    Under subject-hash partitioning the subject sets of a predicate are
    disjoint across workers, so ``count``, ``distinct_subjects``, and the
    subject score merge exactly. Objects may repeat across workers:
    ``distinct_objects`` is merged by summation (an upper bound) and the
    object score by a distinct-object-weighted mean (approximate). Both feed
    only heuristics, so the approximation is safe.
    """
    merged: dict[TermId, PredicateEntry] = {}
    for partial in partials:
        for p, e in partial.entries.items():
            m = merged.setdefault(p, PredicateEntry())
            m.subject_score = _weighted(
                m.subject_score, m.distinct_subjects, e.subject_score, e.distinct_subjects
            )
            m.object_score = _weighted(
                m.object_score, m.distinct_objects, e.object_score, e.distinct_objects
            )
            m.count += e.count
            m.distinct_subjects += e.distinct_subjects
            m.distinct_objects += e.distinct_objects
    return PredicateStats(merged)


def _weighted(score_a: float, n_a: int, score_b: float, n_b: int) -> float:
    if n_a + n_b == 0:
        return 0.0
    return (score_a * n_a + score_b * n_b) / (n_a + n_b)


def stats_tsv(stats: PredicateStats, decode) -> str:
    """One line per predicate: name, count, distinct subjects/objects,
    subject/object scores, per-subject and per-object averages."""
    lines = []
    for p in sorted(stats.predicates(), key=decode):
        e = stats.get(p)
        lines.append(
            "\t".join(
                [
                    decode(p),
                    str(e.count),
                    str(e.distinct_subjects),
                    str(e.distinct_objects),
                    f"{e.subject_score:.4g}",
                    f"{e.object_score:.4g}",
                    f"{e.per_subject:.4g}",
                    f"{e.per_object:.4g}",
                ]
            )
        )
    return "\n".join(lines)
