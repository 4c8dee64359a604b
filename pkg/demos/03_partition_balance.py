"""Walkthrough: why partitioning by subject hash keeps workers balanced.

Builds a synthetic graph whose subjects are drawn uniformly but whose
objects follow a heavy-tailed distribution (a few very popular objects),
then compares worker load when sharding by subject versus by object.
Subject hashing spreads triples evenly; object hashing piles the popular
objects' triples onto a few workers.

Run with:  python3 demos/03_partition_balance.py
"""

import random
from collections import Counter

from adhash.model import Dictionary, EncodedTriple
from adhash.partitioning import ClusterConfig


def build_triples(rng: random.Random, n: int) -> list[tuple[str, str, str]]:
    subjects = [f"<http://example.org/s{i}>" for i in range(5000)]
    objects = [f"<http://example.org/o{i}>" for i in range(5000)]
    preds = [f"<http://example.org/p{i}>" for i in range(10)]
    triples = set()
    while len(triples) < n:
        # Pareto-distributed object popularity, capped to the vocabulary.
        obj = objects[min(int(rng.paretovariate(1.1)) - 1, len(objects) - 1)]
        triples.add((rng.choice(subjects), rng.choice(preds), obj))
    return sorted(triples)


def loads(counts: Counter, workers: int) -> str:
    sizes = [counts.get(w, 0) for w in range(workers)]
    return f"max {max(sizes):>6}  min {min(sizes):>6}  spread {max(sizes) - min(sizes):>6}"


def main() -> None:
    rng = random.Random(7)
    workers = 8
    triples = build_triples(rng, 50_000)

    dictionary = Dictionary()
    encoded = [
        EncodedTriple(dictionary.encode(s), dictionary.encode(p), dictionary.encode(o))
        for s, p, o in triples
    ]

    cfg = ClusterConfig(num_workers=workers, hash_seed=7)
    by_subject = Counter(cfg.worker_of(t.s) for t in encoded)
    by_object = Counter(cfg.worker_of(t.o) for t in encoded)

    print(f"{len(triples)} triples across {workers} workers\n")
    print(f"shard by subject: {loads(by_subject, workers)}")
    print(f"shard by object:  {loads(by_object, workers)}")
    print()
    print("the heavy-tailed objects concentrate load under object sharding,")
    print("while subject sharding stays near-uniform — and it additionally")
    print("guarantees subject-star queries never need communication, since")
    print("all triples of a subject live on one worker.")


if __name__ == "__main__":
    main()
