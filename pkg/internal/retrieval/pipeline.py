import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from internal.domain.catalog.product import Catalog
from internal.domain.errors import (
    ConfigurationError,
    EmptyQueryError,
    ProviderMismatchError,
    VersionMismatchError,
)
from internal.domain.query.decomposition import Constraint
from internal.domain.search.result import (
    RankedResult,
    SearchOutcome,
    SearchTrace,
    StrategyId,
    TraceFlag,
)
from internal.modeling.bm25 import DEFAULT_INDEXED_FIELDS, InvertedIndex, search_keyword
from internal.modeling.decomposer import Decomposer, RuleBasedDecomposer
from internal.modeling.embedding import EmbeddingProvider, HashingEmbedder
from internal.modeling.interaction_scorer import InteractionScorer, TokenOverlapScorer
from internal.retrieval.filtering import FilterPolicy, explain_product, filter_catalog
from internal.retrieval.ranking import DEFAULT_RRF_K, rerank, rrf_fuse
from internal.retrieval.semantic import (
    DEFAULT_EMBEDDING_FIELDS,
    Pooling,
    VectorIndex,
    search_semantic,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineSettings:
    """Result and shortlist sizes; a shortlist of 0 means no cap."""

    result_size: int = 10
    rerank_shortlist: int = 50
    hybrid_depth: int = 50
    qam_shortlist: int = 50
    k_rrf: float = DEFAULT_RRF_K
    rescue_unfiltered: bool = False

    def __post_init__(self):
        if self.result_size < 1 or self.hybrid_depth < 1:
            raise ConfigurationError("result_size and hybrid_depth must be >= 1")
        if self.rerank_shortlist < 0 or self.qam_shortlist < 0:
            raise ConfigurationError("shortlist sizes must be >= 0")
        if self.k_rrf <= 0:
            raise ConfigurationError(f"rrf k must be > 0, got {self.k_rrf}")


@dataclass(frozen=True)
class SearchEngine:
    """The five retrieval strategies over one catalog version.

    Immutable once built; `search` and `explain` only read.
    """

    catalog: Catalog
    lexical_index: InvertedIndex
    vector_index: VectorIndex
    embedder: EmbeddingProvider
    decomposer: Decomposer
    scorer: InteractionScorer
    policy: FilterPolicy = field(default_factory=FilterPolicy)
    settings: EngineSettings = field(default_factory=EngineSettings)

    def __post_init__(self):
        for name, stamp in (
            ("lexical index", self.lexical_index.catalog_version),
            ("vector index", self.vector_index.catalog_version),
        ):
            if stamp != self.catalog.version:
                raise VersionMismatchError(
                    f"{name} was built from catalog {stamp}, "
                    f"current catalog is {self.catalog.version}"
                )
        if self.embedder.provider_id != self.vector_index.provider_id:
            raise ProviderMismatchError(
                f"embedder {self.embedder.provider_id} "
                f"!= vector index provider {self.vector_index.provider_id}"
            )

    @staticmethod
    def build(
        catalog: Catalog,
        embedder: Optional[EmbeddingProvider] = None,
        decomposer: Optional[Decomposer] = None,
        scorer: Optional[InteractionScorer] = None,
        policy: Optional[FilterPolicy] = None,
        settings: Optional[EngineSettings] = None,
        indexed_fields: Sequence[str] = DEFAULT_INDEXED_FIELDS,
        embedding_fields: Sequence[str] = DEFAULT_EMBEDDING_FIELDS,
        pooling: Pooling = Pooling.Concat,
    ) -> "SearchEngine":
        """In-memory engine with default models for anything not given."""
        embedder = embedder or HashingEmbedder()
        return SearchEngine(
            catalog=catalog,
            lexical_index=InvertedIndex.make(catalog, indexed_fields),
            vector_index=VectorIndex.make(catalog, embedder, embedding_fields, pooling),
            embedder=embedder,
            decomposer=decomposer or RuleBasedDecomposer.make(catalog),
            scorer=scorer or TokenOverlapScorer(),
            policy=policy or FilterPolicy(),
            settings=settings or EngineSettings(),
        )

    def search(
        self, strategy: StrategyId, query: str, n: Optional[int] = None
    ) -> SearchOutcome:
        n = self.settings.result_size if n is None else n
        if n < 1:
            raise ValueError(f"n must be >= 1, got {n}")
        if not query or not query.strip():
            raise EmptyQueryError("query is empty")

        trace = SearchTrace(strategy=strategy, query=query)
        match strategy:
            case StrategyId.Keyword:
                results = search_keyword(self.lexical_index, query, n)
            case StrategyId.Semantic:
                results = self._semantic(query, n)
            case StrategyId.Rerank:
                results = self._rerank(query, n, trace)
            case StrategyId.Hybrid:
                results = self._hybrid(query, n, trace)
            case StrategyId.Qam:
                results = self._qam(query, n, trace, final_rank=True)
        trace.stage_counts["results"] = len(results)
        if len(results) < n:
            trace.flags.append(TraceFlag.CandidatesExhausted)
        return SearchOutcome(results=results, trace=trace)

    def explain(self, query: str) -> SearchTrace:
        """QAM decomposition, filter size and shortlist size; no final rerank."""
        if not query or not query.strip():
            raise EmptyQueryError("query is empty")
        trace = SearchTrace(strategy=StrategyId.Qam, query=query)
        self._qam(query, self.settings.result_size, trace, final_rank=False)
        return trace

    def explain_product(
        self, query: str, product_id: str
    ) -> List[Tuple[Constraint, bool]]:
        d = self.decomposer.decompose(query)
        return explain_product(self.catalog.get(product_id), d.constraints, self.policy)

    def _shortlist_size(self, cap: int, pool: int) -> int:
        return pool if cap == 0 else min(cap, pool)

    def _semantic(self, query: str, n: int) -> List[RankedResult]:
        return search_semantic(self.vector_index, self.embedder, query, n)

    def _rerank(self, query: str, n: int, trace: SearchTrace) -> List[RankedResult]:
        size = self._shortlist_size(self.settings.rerank_shortlist, len(self.catalog))
        shortlist = self._semantic(query, size)
        trace.stage_counts["semantic"] = len(shortlist)
        return rerank(
            self.scorer, query, [r.product_id for r in shortlist], self.catalog, n
        )

    def _hybrid(self, query: str, n: int, trace: SearchTrace) -> List[RankedResult]:
        depth = self.settings.hybrid_depth
        lexical = search_keyword(self.lexical_index, query, depth)
        semantic = self._semantic(query, depth)
        trace.stage_counts["keyword"] = len(lexical)
        trace.stage_counts["semantic"] = len(semantic)
        return rrf_fuse([lexical, semantic], self.settings.k_rrf, n)

    def _qam(
        self, query: str, n: int, trace: SearchTrace, final_rank: bool
    ) -> List[RankedResult]:
        d, fell_back = self.decomposer.decompose_traced(query)
        trace.decomposition = d
        if fell_back:
            trace.flags.append(TraceFlag.DecomposerFallback)

        filtered = filter_catalog(self.catalog, d.constraints, self.policy)
        trace.filtered_count = len(filtered)
        trace.stage_counts["filter"] = len(filtered)
        candidates: Optional[frozenset] = filtered
        if not filtered:
            trace.flags.append(TraceFlag.FilterEmpty)
            logger.info("No product satisfies %s", [str(c) for c in d.constraints])
            if not self.settings.rescue_unfiltered:
                return []
            trace.flags.append(TraceFlag.UnfilteredRescue)
            candidates = None

        pool = len(self.catalog) if candidates is None else len(candidates)
        size = self._shortlist_size(self.settings.qam_shortlist, pool)
        semantic_query = d.semantic_residual or query
        shortlist = search_semantic(
            self.vector_index, self.embedder, semantic_query, size, candidates
        )
        trace.stage_counts["semantic"] = len(shortlist)
        if not final_rank:
            return shortlist
        return rerank(
            self.scorer, query, [r.product_id for r in shortlist], self.catalog, n
        )
