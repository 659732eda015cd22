from collections import defaultdict
from math import fsum
from typing import Dict, List, Sequence

from internal.domain.catalog.product import Catalog
from internal.domain.search.result import RankedResult, rank_scores
from internal.modeling.interaction_scorer import InteractionScorer

DEFAULT_RRF_K = 60.0


def rerank(
    scorer: InteractionScorer,
    query: str,
    candidates: Sequence[str],
    catalog: Catalog,
    n: int,
) -> List[RankedResult]:
    """Final ranking: score every candidate against the raw query."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    products = [catalog.get(pid) for pid in dict.fromkeys(candidates)]
    scores = scorer.score_many(query, products)
    return rank_scores({p.id: float(s) for p, s in zip(products, scores)}, n)


def rrf_fuse(
    lists: Sequence[Sequence[RankedResult]],
    k_rrf: float = DEFAULT_RRF_K,
    n: int = 10,
) -> List[RankedResult]:
    """Reciprocal Rank Fusion (Cormack et al., 2009): sum of 1 / (k + rank)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    contributions: Dict[str, List[float]] = defaultdict(list)
    for ranked in lists:
        for result in ranked:
            contributions[result.product_id].append(1.0 / (k_rrf + result.rank))
    # fsum is exactly rounded, so fused scores do not depend on list order
    fused = {pid: fsum(parts) for pid, parts in contributions.items()}
    return rank_scores(fused, n)
