from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

from internal.domain.catalog.product import TEXT_FIELDS, Product
from internal.domain.query.decomposition import DecomposedQuery
from internal.infra.api.model_services import ModelServiceClient
from internal.modeling.tokenizer import Tokenizer, content_tokens
from internal.retrieval.filtering import FilterPolicy, satisfies

DEFAULT_MIN_OVERLAP = 1


class JudgeInterface(ABC):
    """Decides whether a product is relevant to a query."""

    @property
    @abstractmethod
    def judge_id(self) -> str: ...

    @abstractmethod
    def judge(self, query: str, d: DecomposedQuery, product: Product) -> bool: ...

    def judge_many(
        self, query: str, d: DecomposedQuery, products: Sequence[Product]
    ) -> List[bool]:
        return [self.judge(query, d, p) for p in products]

    @staticmethod
    def make(
        kind: str,
        policy: Optional[FilterPolicy] = None,
        min_overlap: int = DEFAULT_MIN_OVERLAP,
        tokenizer: Optional[Tokenizer] = None,
        url: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
    ) -> "JudgeInterface":
        match kind:
            case "deterministic":
                policy = policy or FilterPolicy()
                return DeterministicJudge(policy, min_overlap, tokenizer)
            case "remote":
                if not url:
                    raise ValueError("remote judge requires a url")
                client = ModelServiceClient.make(url, api_key, timeout)
                return RemoteJudge(client)
            case _:
                raise ValueError(f"Unsupported judge: {kind}")


class DeterministicJudge(JudgeInterface):
    """Exact metadata match (with the filter's slack) plus residual-token overlap.

    A residual without content tokens imposes no text requirement.
    """

    def __init__(
        self,
        policy: FilterPolicy,
        min_overlap: int = DEFAULT_MIN_OVERLAP,
        tokenizer: Optional[Tokenizer] = None,
    ):
        if min_overlap < 1:
            raise ValueError(f"min_overlap must be >= 1, got {min_overlap}")
        self._policy = policy
        self._min_overlap = min_overlap
        self._tokenizer = tokenizer or Tokenizer()

    @property
    def judge_id(self) -> str:
        return f"deterministic-overlap{self._min_overlap}"

    def judge(self, query: str, d: DecomposedQuery, product: Product) -> bool:
        if not all(satisfies(product, c, self._policy) for c in d.constraints):
            return False
        wanted = set(content_tokens(self._tokenizer.tokenize(d.semantic_residual)))
        if not wanted:
            return True
        present = set(self._tokenizer.tokenize(product.text(TEXT_FIELDS)))
        return len(wanted & present) >= min(self._min_overlap, len(wanted))


def judge_deterministic(
    query_id: str,
    d: DecomposedQuery,
    p: Product,
    policy: FilterPolicy,
    min_overlap: int = DEFAULT_MIN_OVERLAP,
) -> bool:
    return DeterministicJudge(policy, min_overlap).judge(d.raw, d, p)


class RemoteJudge(JudgeInterface):
    """LLM-style judge behind an HTTP endpoint: {query, results} -> {relevant}."""

    def __init__(self, client: ModelServiceClient):
        self._client = client

    @property
    def judge_id(self) -> str:
        return f"remote-{self._client.base_url}"

    def judge(self, query: str, d: DecomposedQuery, product: Product) -> bool:
        return self.judge_many(query, d, [product])[0]

    def judge_many(
        self, query: str, d: DecomposedQuery, products: Sequence[Product]
    ) -> List[bool]:
        if not products:
            return []
        results = [p.to_record() for p in products]
        return self._client.judge(query, results)
