from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

from internal.domain.catalog.product import Product
from internal.infra.api.model_services import ModelServiceClient
from internal.modeling.tokenizer import Tokenizer

DEFAULT_OVERLAP_WEIGHT = 0.7
DEFAULT_TITLE_WEIGHT = 0.3


class InteractionScorer(ABC):
    """Scores a (query, product) pair jointly; higher is more relevant."""

    @property
    @abstractmethod
    def scorer_id(self) -> str: ...

    @abstractmethod
    def score(self, query: str, product: Product) -> float: ...

    def score_many(self, query: str, products: Sequence[Product]) -> List[float]:
        return [self.score(query, p) for p in products]

    @staticmethod
    def make(
        kind: str,
        tokenizer: Optional[Tokenizer] = None,
        overlap_weight: float = DEFAULT_OVERLAP_WEIGHT,
        title_weight: float = DEFAULT_TITLE_WEIGHT,
        url: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
    ) -> "InteractionScorer":
        match kind:
            case "overlap":
                return TokenOverlapScorer(tokenizer, overlap_weight, title_weight)
            case "remote":
                if not url:
                    raise ValueError("remote interaction scorer requires a url")
                client = ModelServiceClient.make(url, api_key, timeout)
                return RemoteInteractionScorer(client)
            case _:
                raise ValueError(f"Unsupported interaction scorer: {kind}")


class TokenOverlapScorer(InteractionScorer):
    """overlap_weight * F1(query tokens, product tokens)
    + title_weight * share of query tokens found in the title."""

    def __init__(
        self,
        tokenizer: Optional[Tokenizer] = None,
        overlap_weight: float = DEFAULT_OVERLAP_WEIGHT,
        title_weight: float = DEFAULT_TITLE_WEIGHT,
    ):
        if overlap_weight < 0 or title_weight < 0:
            raise ValueError("scorer weights must be non-negative")
        if abs(overlap_weight + title_weight - 1.0) > 1e-9:
            raise ValueError("scorer weights must sum to 1")
        self._tokenizer = tokenizer or Tokenizer()
        self._overlap_weight = overlap_weight
        self._title_weight = title_weight

    @property
    def scorer_id(self) -> str:
        return f"overlap-{self._overlap_weight:g}-{self._title_weight:g}"

    def score(self, query: str, product: Product) -> float:
        query_tokens = set(self._tokenizer.tokenize(query))
        if not query_tokens:
            return 0.0
        product_tokens = set(self._tokenizer.tokenize(product.text()))
        title_tokens = set(self._tokenizer.tokenize(product.title))

        f1 = 0.0
        common = len(query_tokens & product_tokens)
        if common:
            precision = common / len(query_tokens)
            recall = common / len(product_tokens)
            f1 = 2 * precision * recall / (precision + recall)
        title_share = len(query_tokens & title_tokens) / len(query_tokens)
        return self._overlap_weight * f1 + self._title_weight * title_share


class RemoteInteractionScorer(InteractionScorer):
    """Adapter for cross-encoder services speaking {query, passages} -> {scores}."""

    def __init__(self, client: ModelServiceClient):
        self._client = client

    @property
    def scorer_id(self) -> str:
        return f"remote-{self._client.base_url}"

    def score(self, query: str, product: Product) -> float:
        return self.score_many(query, [product])[0]

    def score_many(self, query: str, products: Sequence[Product]) -> List[float]:
        if not products:
            return []
        return self._client.rerank(query, [p.text() for p in products])
