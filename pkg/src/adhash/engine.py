"""Master-side engine: load a dataset, answer queries, adapt to the workload.

Execution path per query:

* subject-star queries run in parallel against every worker's main index with
  zero communication (subject-hash placement makes them embarrassingly
  parallel);
* general queries whose redistribution tree the pattern index contains run in
  parallel against the replica modules installed for that pattern;
* everything else runs distributed: cost-based join ordering at the master,
  then semi-join steps that ship join columns and candidate triples.

When adaptivity is enabled every executed query also feeds the heat map, and
patterns whose frequency reaches the threshold trigger incremental
redistribution, bounded by the per-worker replication budget.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, TextIO, Union

from .adaptivity import (
    RedistributionController,
    RedistributionTree,
    UntreeableQuery,
    build_redistribution_tree,
    match_pattern_index,
    score_vertices,
)
from .executor import (
    BindingTable,
    Cluster,
    TraceRecorder,
    Worker,
    execute_distributed,
    execute_parallel,
)
from .model import Dictionary, load_ntriples
from .partitioning import ClusterConfig, balance_report, shard
from .planner import ExecutionPlan, optimize
from .query import Classification, QueryGraph, classify, parse_query
from .storage import (
    PredicateStats,
    WorkerStore,
    aggregate_stats,
    compute_degrees,
    compute_local_stats,
    stats_tsv,
)

_EMPTY_STORE = WorkerStore()


@dataclass(frozen=True)
class RunConfig:
    """Tunable engine knobs; all have sensible defaults."""

    num_workers: int = 2
    hash_seed: Optional[int] = None
    adaptive: bool = True
    frequency_threshold: int = 10
    budget_percent: float = 20.0


@dataclass
class QueryResult:
    columns: tuple[str, ...]
    rows: set[tuple[str, ...]]
    mode: str  # "parallel" or "distributed"
    payload_rows: int
    plan: Optional[ExecutionPlan] = None
    trace: Optional[TraceRecorder] = None

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class WorkloadSummary:
    queries_run: int = 0
    errors: list[str] = field(default_factory=list)
    parallel_queries: int = 0
    distributed_queries: int = 0
    total_payload_rows: int = 0
    total_result_rows: int = 0
    elapsed_seconds: float = 0.0

    def report(self) -> str:
        return "\n".join(
            [
                f"queries run:          {self.queries_run}",
                f"parallel mode:        {self.parallel_queries}",
                f"distributed mode:     {self.distributed_queries}",
                f"payload rows shipped: {self.total_payload_rows}",
                f"result rows:          {self.total_result_rows}",
                f"errors:               {len(self.errors)}",
                f"elapsed seconds:      {self.elapsed_seconds:.3f}",
            ]
        )


class Engine:
    """One loaded dataset plus the simulated worker cluster serving it."""

    def __init__(
        self,
        cluster: Cluster,
        stats: PredicateStats,
        config: RunConfig,
        base_triples: int,
    ):
        self.cluster = cluster
        self.stats = stats
        self.config = config
        self.base_triples = base_triples
        self.clock = 0  # logical query counter; drives LRU timestamps
        budget = (
            config.budget_percent / 100.0 * base_triples / cluster.num_workers
            if cluster.num_workers
            else 0.0
        )
        self.controller = RedistributionController(budget_per_worker=budget)

    # -- construction --

    @classmethod
    def load(
        cls, source: Union[str, Path, TextIO, Iterable[str]], config: RunConfig
    ) -> "Engine":
        """Build an engine from N-Triples input (path or line stream)."""
        if isinstance(source, (str, Path)):
            with open(source, "r", encoding="utf-8") as fh:
                triples, dictionary = load_ntriples(fh)
        else:
            triples, dictionary = load_ntriples(source)
        cfg = ClusterConfig(config.num_workers, config.hash_seed)
        shards = shard(triples, cfg)
        workers = [Worker(i, WorkerStore(s)) for i, s in enumerate(shards)]
        degrees = compute_degrees(triples)
        stats = aggregate_stats(
            [compute_local_stats(w.store, degrees) for w in workers]
        )
        cluster = Cluster(cfg, workers, dictionary)
        return cls(cluster, stats, config, len(set(triples)))

    # -- querying --

    def execute(self, query: Union[str, QueryGraph]) -> QueryResult:
        q = parse_query(query) if isinstance(query, str) else query
        self.clock += 1
        trace = TraceRecorder()
        kind = classify(q)
        tree = self._tree_for(q)

        plan: Optional[ExecutionPlan] = None
        if kind is Classification.SUBJECT_STAR:
            table = execute_parallel(self.cluster, q, trace=trace)
            mode = "parallel"
        else:
            mapping = None
            if self.config.adaptive and tree is not None:
                mapping = match_pattern_index(
                    tree, self.controller.pattern_index, self.clock
                )
            if mapping is not None:
                table = execute_parallel(
                    self.cluster, q, self._module_map(mapping), trace=trace
                )
                mode = "parallel"
            else:
                plan = optimize(
                    q,
                    self.stats,
                    self.cluster.num_workers,
                    self.cluster.dictionary.lookup,
                    self.cluster.consult,
                )
                table = execute_distributed(self.cluster, q, plan, trace)
                mode = "distributed"

        if self.config.adaptive and tree is not None:
            self._monitor(tree)
        return QueryResult(
            columns=table.columns,
            rows=self._decode(table),
            mode=mode,
            payload_rows=trace.total_payload_rows,
            plan=plan,
            trace=trace,
        )

    def run_workload(self, text: str) -> WorkloadSummary:
        """Execute ';'-separated queries in order, tolerating bad ones."""
        summary = WorkloadSummary()
        start = time.perf_counter()
        for chunk in text.split(";"):
            if not chunk.strip():
                continue
            try:
                result = self.execute(chunk)
            except ValueError as exc:
                summary.errors.append(f"{chunk.strip()[:60]!r}: {exc}")
                continue
            summary.queries_run += 1
            summary.total_payload_rows += result.payload_rows
            summary.total_result_rows += len(result)
            if result.mode == "parallel":
                summary.parallel_queries += 1
            else:
                summary.distributed_queries += 1
        summary.elapsed_seconds = time.perf_counter() - start
        return summary

    # -- introspection --

    def replica_counts(self) -> list[int]:
        return [w.replica_count() for w in self.cluster.workers]

    def replication_ratio(self) -> float:
        return (
            sum(self.replica_counts()) / self.base_triples
            if self.base_triples
            else 0.0
        )

    def predicate_report(self) -> str:
        return stats_tsv(self.stats, self.cluster.dictionary.decode)

    def balance(self) -> tuple[int, int, float]:
        return balance_report(
            [list(w.store.triples()) for w in self.cluster.workers]
        )

    def adaptivity_report(self) -> str:
        counts = ", ".join(
            f"w{w.wid}={w.replica_count()}" for w in self.cluster.workers
        )
        lines = [
            f"budget per worker: {self.controller.budget_per_worker:g} triples",
            f"replica triples:   {counts}",
            f"replication ratio: {self.replication_ratio():.4f}",
            "pattern index:",
            self.controller.pattern_index.dump(),
            "evictions: epoch\tpattern\ttriples_freed",
        ]
        for rec in self.controller.eviction_log:
            lines.append(f"{rec.epoch}\t{rec.pattern}\t{rec.triples_freed}")
        for skipped in self.controller.skipped_patterns:
            lines.append(f"skipped (over budget): {skipped}")
        return "\n".join(lines)

    # -- internals --

    def _tree_for(self, q: QueryGraph) -> Optional[RedistributionTree]:
        scores = score_vertices(
            q, self.stats, self.cluster.dictionary.lookup
        )
        try:
            return build_redistribution_tree(q, scores)
        except UntreeableQuery:
            return None

    def _module_map(self, mapping: dict[int, Optional[tuple]]) -> list[dict]:
        """Per-worker pattern->store table for parallel-mode evaluation:
        core-subject patterns read the main index, the rest their modules."""
        tables = []
        for w in self.cluster.workers:
            table = {}
            for pattern_index, path in mapping.items():
                if path is None:
                    table[pattern_index] = w.store
                else:
                    table[pattern_index] = w.replicas.get(path, _EMPTY_STORE)
            tables.append(table)
        return tables

    def _monitor(self, tree: RedistributionTree) -> None:
        hot = self.controller.record_query(
            tree, self.config.frequency_threshold
        )
        if hot is None:
            return
        contained = match_pattern_index(
            hot, self.controller.pattern_index, self.clock, touch=False
        )
        if contained is None:
            self.controller.redistribute(hot, self.cluster, self.clock)

    def _decode(self, table: BindingTable) -> set[tuple[str, ...]]:
        decode = self.cluster.dictionary.decode
        return {tuple(decode(v) for v in row) for row in table.rows}
