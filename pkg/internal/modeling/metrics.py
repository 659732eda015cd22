from typing import Sequence

import numpy as np

from internal.domain.errors import EmptyInputError


def _padded(labels: Sequence[bool], k: int) -> np.ndarray:
    """First k labels; a short list is padded with non-relevant results."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    out = np.zeros(k, dtype=bool)
    head = np.asarray(list(labels)[:k], dtype=bool)
    out[: head.size] = head
    return out


def precision_at_k(labels: Sequence[bool], k: int) -> float:
    """Relevant results in the top k, over k."""
    return float(np.count_nonzero(_padded(labels, k))) / k


def ap_at_k(labels: Sequence[bool], total_relevant: int, k: int) -> float:
    """Average precision truncated at k, normalised by min(k, total_relevant).

    Zero when nothing is relevant.
    """
    if total_relevant < 0:
        raise ValueError(f"total_relevant must be >= 0, got {total_relevant}")
    rel = _padded(labels, k)
    if total_relevant == 0 or not rel.any():
        return 0.0
    ranks = np.arange(1, k + 1)
    precision_at_i = np.cumsum(rel) / ranks
    ap = float(precision_at_i[rel].sum()) / min(k, total_relevant)
    return min(ap, 1.0)


def map_at_k(per_query_ap: Sequence[float]) -> float:
    if len(per_query_ap) == 0:
        raise EmptyInputError("mAP over an empty query set is undefined")
    return float(np.mean(np.asarray(per_query_ap, dtype=np.float64)))
