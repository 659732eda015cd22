from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, Optional

from internal.domain.query.decomposition import DecomposedQuery


class StrategyId(Enum):
    Keyword = "keyword"
    Semantic = "semantic"
    Rerank = "rerank"
    Hybrid = "hybrid"
    Qam = "qam"

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]


_DISPLAY_NAMES = {
    StrategyId.Keyword: "Keyword Search",
    StrategyId.Semantic: "Semantic Search",
    StrategyId.Rerank: "Re-Ranking",
    StrategyId.Hybrid: "Hybrid Search",
    StrategyId.Qam: "QAM",
}


@dataclass(frozen=True)
class RankedResult:
    product_id: str
    score: float
    rank: int

    def to_record(self) -> Dict[str, Any]:
        return {"product_id": self.product_id, "score": self.score, "rank": self.rank}


def rank_scores(scores: Mapping[str, float], n: int) -> List[RankedResult]:
    """Top-n by score descending, ties broken by ascending product id."""
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:n]
    return [
        RankedResult(product_id=pid, score=float(score), rank=i + 1)
        for i, (pid, score) in enumerate(ordered)
    ]


class TraceFlag(Enum):
    FilterEmpty = "filter_empty"
    CandidatesExhausted = "candidates_exhausted"
    DecomposerFallback = "decomposer_fallback"
    UnfilteredRescue = "unfiltered_rescue"


@dataclass
class SearchTrace:
    strategy: StrategyId
    query: str
    decomposition: Optional[DecomposedQuery] = None
    filtered_count: Optional[int] = None
    stage_counts: Dict[str, int] = field(default_factory=dict)
    flags: List[TraceFlag] = field(default_factory=list)

    def to_record(self) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "strategy": self.strategy.value,
            "query": self.query,
            "stage_counts": dict(self.stage_counts),
            "flags": [f.value for f in self.flags],
        }
        if self.decomposition is not None:
            record["decomposition"] = self.decomposition.to_wire()
        if self.filtered_count is not None:
            record["filtered_count"] = self.filtered_count
        return record


@dataclass(frozen=True)
class SearchOutcome:
    results: List[RankedResult]
    trace: SearchTrace
