"""Subject-hash sharding of encoded triples across workers.

Triple t goes to worker ``hash(t.s) mod N``, so every subject's triples
co-reside on one worker and subject-star joins never cross workers. The
default hash is the identity (worker = id mod N); a seeded multiplicative
hash is available for skew resistance.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import EncodedTriple, TermId

_MULT = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class ClusterConfig:
    """Worker count plus the deterministic subject-to-worker hash."""

    num_workers: int = 1
    hash_seed: int | None = None

    def __post_init__(self):
        if self.num_workers < 1:
            raise ValueError("num_workers must be >= 1")

    def worker_of(self, term_id: TermId) -> int:
        if self.hash_seed is None:
            return term_id % self.num_workers
        h = ((term_id + self.hash_seed + 1) * _MULT) & _MASK
        return (h >> 32) % self.num_workers


def shard(
    triples: Iterable[EncodedTriple], cfg: ClusterConfig
) -> list[list[EncodedTriple]]:
    """Partition triples by subject hash; no replication, nothing dropped."""
    shards: list[list[EncodedTriple]] = [[] for _ in range(cfg.num_workers)]
    for t in triples:
        shards[cfg.worker_of(t.s)].append(t)
    return shards


def balance_report(shards: Sequence[Sequence]) -> tuple[int, int, float]:
    """(max, min, population stddev) of shard sizes."""
    sizes = [len(s) for s in shards]
    return max(sizes), min(sizes), statistics.pstdev(sizes)
