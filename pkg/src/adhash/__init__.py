"""In-memory master/worker engine for basic-graph-pattern queries over RDF.

Triples are dictionary-encoded and hash-partitioned by subject across
simulated workers. General queries run through cost-based distributed
semi-join plans; star queries and workload-hot patterns run fully in parallel
with zero communication, driven by incremental redistribution under a
replication budget.
"""

from .engine import Engine, QueryResult, RunConfig, WorkloadSummary
from .model import Dictionary, EncodedTriple, load_ntriples
from .partitioning import ClusterConfig
from .query import Classification, QueryGraph, classify, parse_query
from .storage import PredicateStats, WorkerStore

__all__ = [
    "Classification",
    "ClusterConfig",
    "Dictionary",
    "EncodedTriple",
    "Engine",
    "PredicateStats",
    "QueryGraph",
    "QueryResult",
    "RunConfig",
    "WorkerStore",
    "WorkloadSummary",
    "classify",
    "load_ntriples",
    "parse_query",
]

__version__ = "0.1.0"
