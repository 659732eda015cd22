from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, List, Optional, Tuple

from internal.domain.errors import VersionMismatchError
from internal.domain.query.decomposition import DecomposedQuery
from internal.domain.search.result import RankedResult, SearchTrace, StrategyId


@dataclass(frozen=True)
class Judgment:
    query_id: str
    product_id: str
    relevant: bool
    judge_id: str

    def to_record(self) -> Dict[str, Any]:
        return {
            "query_id": self.query_id,
            "product_id": self.product_id,
            "relevant": self.relevant,
            "judge_id": self.judge_id,
        }

    @staticmethod
    def from_record(record: Dict[str, Any]) -> "Judgment":
        return Judgment(
            query_id=str(record["query_id"]),
            product_id=str(record["product_id"]),
            relevant=bool(record["relevant"]),
            judge_id=str(record["judge_id"]),
        )


@dataclass(frozen=True)
class EvalQuery:
    """A query to evaluate, optionally with its intended decomposition and
    ground-truth relevant set (known for generated queries)."""

    query_id: str
    text: str
    intended: Optional[DecomposedQuery] = None
    relevant_ids: Optional[FrozenSet[str]] = None

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {"query_id": self.query_id, "text": self.text}
        if self.intended is not None:
            record["intended"] = self.intended.to_wire()
        if self.relevant_ids is not None:
            record["relevant_ids"] = sorted(self.relevant_ids)
        return record

    @staticmethod
    def from_record(record: Dict[str, Any]) -> "EvalQuery":
        intended = record.get("intended")
        relevant = record.get("relevant_ids")
        return EvalQuery(
            query_id=str(record["query_id"]),
            text=str(record["text"]),
            intended=None if intended is None else DecomposedQuery.from_wire(intended),
            relevant_ids=None if relevant is None else frozenset(map(str, relevant)),
        )


@dataclass(frozen=True)
class RunRecord:
    """One strategy's answer to one query, as written to the run file."""

    query_id: str
    strategy: StrategyId
    results: Tuple[RankedResult, ...]
    trace: Optional[SearchTrace] = None

    def to_record(self) -> Dict[str, Any]:
        return {
            "query_id": self.query_id,
            "strategy": self.strategy.value,
            "results": [r.to_record() for r in self.results],
            "trace": None if self.trace is None else self.trace.to_record(),
        }

    @property
    def product_ids(self) -> List[str]:
        return [r.product_id for r in self.results]


@dataclass(frozen=True)
class StrategyMetrics:
    """P@k and mAP@k per k; None where no query had k relevant items."""

    strategy: StrategyId
    precision: Dict[int, Optional[float]]
    mean_ap: Dict[int, Optional[float]]
    per_query_ap: Dict[str, Dict[int, float]] = field(default_factory=dict)

    def to_record(self) -> Dict[str, Any]:
        return {
            "strategy": self.strategy.value,
            "precision": {str(k): v for k, v in self.precision.items()},
            "mean_ap": {str(k): v for k, v in self.mean_ap.items()},
            "per_query_ap": {
                qid: {str(k): v for k, v in aps.items()}
                for qid, aps in self.per_query_ap.items()
            },
        }

    @staticmethod
    def from_record(record: Dict[str, Any]) -> "StrategyMetrics":
        return StrategyMetrics(
            strategy=StrategyId(record["strategy"]),
            precision={int(k): v for k, v in record["precision"].items()},
            mean_ap={int(k): v for k, v in record["mean_ap"].items()},
            per_query_ap={
                qid: {int(k): v for k, v in aps.items()}
                for qid, aps in record.get("per_query_ap", {}).items()
            },
        )


@dataclass(frozen=True)
class MetricReport:
    k_set: Tuple[int, ...]
    query_count: int
    queries_per_k: Dict[int, int]
    strategies: Tuple[StrategyMetrics, ...]
    relevance_source: str
    notes: Tuple[str, ...] = ()

    FORMAT_VERSION = 1

    def metrics_for(self, strategy: StrategyId) -> StrategyMetrics:
        for metrics in self.strategies:
            if metrics.strategy is strategy:
                return metrics
        raise KeyError(strategy.value)

    def to_record(self) -> Dict[str, Any]:
        return {
            "format_version": self.FORMAT_VERSION,
            "k_set": list(self.k_set),
            "query_count": self.query_count,
            "queries_per_k": {str(k): n for k, n in self.queries_per_k.items()},
            "strategies": [m.to_record() for m in self.strategies],
            "relevance_source": self.relevance_source,
            "notes": list(self.notes),
        }

    @staticmethod
    def from_record(record: Dict[str, Any]) -> "MetricReport":
        if record.get("format_version") != MetricReport.FORMAT_VERSION:
            raise VersionMismatchError(
                f"metric report format {record.get('format_version')} "
                f"!= supported {MetricReport.FORMAT_VERSION}"
            )
        return MetricReport(
            k_set=tuple(int(k) for k in record["k_set"]),
            query_count=int(record["query_count"]),
            queries_per_k={int(k): int(n) for k, n in record["queries_per_k"].items()},
            strategies=tuple(
                StrategyMetrics.from_record(m) for m in record["strategies"]
            ),
            relevance_source=str(record["relevance_source"]),
            notes=tuple(record.get("notes", ())),
        )
