"""Clients for externally hosted models: embedder, reranker, decomposer, judge."""

from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ValidationError

from internal.domain.errors import RemoteServiceError
from internal.infra.api.api import API, Context, HeaderApiKeyAuth


class EmbeddingInfo(BaseModel):
    dimension: int
    model: str = "remote"


class EmbeddingReply(BaseModel):
    vectors: List[List[float]]


class ScoreReply(BaseModel):
    scores: List[float]


class JudgeReply(BaseModel):
    relevant: List[bool]


def _parse(model: type[BaseModel], payload: Any, endpoint: str) -> Any:
    try:
        return model.model_validate(payload)
    except ValidationError as exc:
        raise RemoteServiceError(f"malformed reply from {endpoint}: {exc}") from exc


class ModelServiceClient:

    def __init__(self, base_url: str, ctx: Context) -> None:
        self._base_url = base_url
        self._api = API(ctx)

    @staticmethod
    def make(
        base_url: str, api_key: Optional[str] = None, timeout: float = 120.0
    ) -> "ModelServiceClient":
        auth = HeaderApiKeyAuth(api_key) if api_key else None
        return ModelServiceClient(base_url, Context.make(auth, timeout))

    @property
    def base_url(self) -> str:
        return self._base_url

    def embedding_info(self) -> EmbeddingInfo:
        data = self._api.call("GET", (self._base_url, "info"))
        return _parse(EmbeddingInfo, data, "info")

    def embed(self, texts: List[str]) -> List[List[float]]:
        data = self._api.call("POST", (self._base_url, "embed"), body={"texts": texts})
        reply = _parse(EmbeddingReply, data, "embed")
        if len(reply.vectors) != len(texts):
            raise RemoteServiceError(
                f"embed returned {len(reply.vectors)} vectors for {len(texts)} texts"
            )
        return reply.vectors

    def rerank(self, query: str, passages: List[str]) -> List[float]:
        data = self._api.call(
            "POST",
            (self._base_url, "rerank"),
            body={"query": query, "passages": passages},
        )
        reply = _parse(ScoreReply, data, "rerank")
        if len(reply.scores) != len(passages):
            raise RemoteServiceError(
                f"rerank returned {len(reply.scores)} scores "
                f"for {len(passages)} passages"
            )
        return reply.scores

    def decompose(self, query: str) -> Dict[str, Any]:
        data = self._api.call(
            "POST", (self._base_url, "decompose"), body={"query": query}
        )
        if not isinstance(data, dict):
            raise RemoteServiceError(f"decompose returned {type(data).__name__}")
        return data

    def judge(self, query: str, results: List[Dict[str, Any]]) -> List[bool]:
        data = self._api.call(
            "POST", (self._base_url, "judge"), body={"query": query, "results": results}
        )
        reply = _parse(JudgeReply, data, "judge")
        if len(reply.relevant) != len(results):
            raise RemoteServiceError(
                f"judge returned {len(reply.relevant)} labels "
                f"for {len(results)} results"
            )
        return reply.relevant
