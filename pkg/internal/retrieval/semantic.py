import logging
from enum import Enum
from typing import AbstractSet, Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from internal.domain.catalog.product import TEXT_FIELDS, Catalog, Product
from internal.domain.errors import (
    ConfigurationError,
    DimensionMismatchError,
    EmptyCatalogError,
    ProductNotFoundError,
    ProviderMismatchError,
    VersionMismatchError,
)
from internal.domain.search.result import RankedResult, rank_scores
from internal.modeling.embedding import EmbeddingProvider

logger = logging.getLogger(__name__)

DEFAULT_EMBEDDING_FIELDS: Tuple[str, ...] = TEXT_FIELDS


class Pooling(Enum):
    # one vector per product over all selected fields
    Concat = "concat"
    # one vector for title+description plus one per review, scored by max
    MaxReview = "max_review"


class VectorIndex:
    """Brute-force cosine index; rows are unit vectors owned by products."""

    FORMAT_VERSION = 1

    def __init__(
        self,
        product_ids: List[str],
        matrix: np.ndarray,
        owners: np.ndarray,
        provider_id: str,
        source_fields: Tuple[str, ...],
        pooling: Pooling,
        catalog_version: str,
    ):
        if matrix.shape[0] != owners.shape[0]:
            raise ValueError("every vector row needs an owning product")
        self._product_ids = product_ids
        self._row_of = {pid: i for i, pid in enumerate(product_ids)}
        self._matrix = matrix
        self._owners = owners
        self._provider_id = provider_id
        self._source_fields = source_fields
        self._pooling = pooling
        self._catalog_version = catalog_version

    @classmethod
    def make(
        cls,
        catalog: Catalog,
        provider: EmbeddingProvider,
        fields: Sequence[str] = DEFAULT_EMBEDDING_FIELDS,
        pooling: Pooling = Pooling.Concat,
    ) -> "VectorIndex":
        unknown = [f for f in fields if f not in TEXT_FIELDS]
        if not fields or unknown:
            raise ConfigurationError(
                f"Invalid embedding fields {list(fields)}; "
                f"expected some of {list(TEXT_FIELDS)}"
            )
        if len(catalog) == 0:
            raise EmptyCatalogError("cannot build a vector index over an empty catalog")

        texts: List[str] = []
        owners: List[int] = []
        for i, product in enumerate(catalog):
            for text in _product_texts(product, fields, pooling):
                texts.append(text)
                owners.append(i)

        matrix = provider.embed_many(texts)
        if matrix.shape[1] != provider.dimension:
            raise DimensionMismatchError(
                f"{provider.provider_id} produced {matrix.shape[1]}-d vectors, "
                f"declared {provider.dimension}"
            )
        logger.info(
            "Built vector index: %d products, %d vectors, provider=%s, pooling=%s",
            len(catalog),
            len(texts),
            provider.provider_id,
            pooling.value,
        )
        return cls(
            product_ids=catalog.ids,
            matrix=matrix,
            owners=np.asarray(owners, dtype=np.int64),
            provider_id=provider.provider_id,
            source_fields=tuple(fields),
            pooling=pooling,
            catalog_version=catalog.version,
        )

    @property
    def product_ids(self) -> List[str]:
        return list(self._product_ids)

    @property
    def provider_id(self) -> str:
        return self._provider_id

    @property
    def source_fields(self) -> Tuple[str, ...]:
        return self._source_fields

    @property
    def pooling(self) -> Pooling:
        return self._pooling

    @property
    def dimension(self) -> int:
        return int(self._matrix.shape[1])

    @property
    def catalog_version(self) -> str:
        return self._catalog_version

    def scores(self, query_vector: np.ndarray) -> np.ndarray:
        """Per-product cosine (max over the product's vectors)."""
        if query_vector.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"query vector shape {query_vector.shape}, "
                f"index dimension {self.dimension}"
            )
        row_scores = np.clip(self._matrix @ query_vector, -1.0, 1.0)
        if self._pooling is Pooling.Concat:
            return row_scores
        product_scores = np.full(len(self._product_ids), -np.inf)
        np.maximum.at(product_scores, self._owners, row_scores)
        return product_scores

    def row_of(self, product_id: str) -> int:
        try:
            return self._row_of[product_id]
        except KeyError:
            raise ProductNotFoundError(product_id) from None

    def to_state(self) -> Dict[str, Any]:
        return {
            "format_version": self.FORMAT_VERSION,
            "catalog_version": self._catalog_version,
            "provider_id": self._provider_id,
            "product_ids": list(self._product_ids),
            "matrix": self._matrix,
            "owners": self._owners,
            "source_fields": list(self._source_fields),
            "pooling": self._pooling.value,
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "VectorIndex":
        if state.get("format_version") != cls.FORMAT_VERSION:
            raise VersionMismatchError(
                f"vector index format {state.get('format_version')} "
                f"!= supported {cls.FORMAT_VERSION}"
            )
        return cls(
            product_ids=list(state["product_ids"]),
            matrix=np.asarray(state["matrix"], dtype=np.float64),
            owners=np.asarray(state["owners"], dtype=np.int64),
            provider_id=state["provider_id"],
            source_fields=tuple(state["source_fields"]),
            pooling=Pooling(state["pooling"]),
            catalog_version=state["catalog_version"],
        )


def _product_texts(
    product: Product, fields: Sequence[str], pooling: Pooling
) -> List[str]:
    if pooling is Pooling.Concat:
        return [product.text(fields)]
    base_fields = [f for f in fields if f != "reviews"]
    texts = [product.text(base_fields) if base_fields else ""]
    if "reviews" in fields:
        texts.extend(product.review_texts)
    return texts


def build_vector_index(
    catalog: Catalog,
    provider: EmbeddingProvider,
    fields: Sequence[str] = DEFAULT_EMBEDDING_FIELDS,
    pooling: Pooling = Pooling.Concat,
) -> VectorIndex:
    return VectorIndex.make(catalog, provider, fields, pooling)


def search_semantic(
    index: VectorIndex,
    provider: EmbeddingProvider,
    query_text: str,
    n: int,
    candidates: Optional[AbstractSet[str]] = None,
) -> List[RankedResult]:
    """Top-n products by cosine to the query; `candidates` restricts the pool."""
    if provider.provider_id != index.provider_id:
        raise ProviderMismatchError(
            f"query provider {provider.provider_id} "
            f"!= index provider {index.provider_id}"
        )
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")

    scores = index.scores(provider.embed(query_text))
    ids = index.product_ids
    if candidates is None:
        pool = range(len(ids))
    else:
        pool = sorted(index.row_of(pid) for pid in candidates)
    return rank_scores({ids[i]: float(scores[i]) for i in pool}, n)
