import hashlib
from abc import ABC, abstractmethod
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple

import numpy as np

from internal.domain.errors import DimensionMismatchError
from internal.infra.api.model_services import ModelServiceClient
from internal.modeling.tokenizer import Tokenizer

DEFAULT_DIMENSION = 256
DEFAULT_HASH_SEED = 20250115


def l2_normalize(vector: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vector)
    if norm == 0.0:
        return np.zeros_like(vector, dtype=np.float64)
    return vector / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"cosine of shapes {a.shape} and {b.shape}")
    norm_a, norm_b = np.linalg.norm(a), np.linalg.norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / (norm_a * norm_b), -1.0, 1.0))


class EmbeddingProvider(ABC):
    """Text encoder producing fixed-dimension, L2-normalized vectors."""

    @property
    @abstractmethod
    def provider_id(self) -> str: ...

    @property
    @abstractmethod
    def dimension(self) -> int: ...

    @abstractmethod
    def embed(self, text: str) -> np.ndarray: ...

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self.dimension), dtype=np.float64)
        return np.vstack([self.embed(t) for t in texts])

    @staticmethod
    def make(
        kind: str,
        dimension: int = DEFAULT_DIMENSION,
        seed: int = DEFAULT_HASH_SEED,
        tokenizer: Optional[Tokenizer] = None,
        url: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
    ) -> "EmbeddingProvider":
        match kind:
            case "hashing":
                return HashingEmbedder(dimension, seed, tokenizer)
            case "remote":
                if not url:
                    raise ValueError("remote embedding provider requires a url")
                return RemoteEmbeddingProvider.connect(url, api_key, timeout)
            case _:
                raise ValueError(f"Unsupported embedding provider: {kind}")


@lru_cache(maxsize=65536)
def _signed_bucket(token: str, seed: int, dimension: int) -> Tuple[int, float]:
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=8, key=seed.to_bytes(8, "little")
    ).digest()
    value = int.from_bytes(digest, "little")
    sign = -1.0 if value >> 63 else 1.0
    return value % dimension, sign


class HashingEmbedder(EmbeddingProvider):
    """Signed feature hashing of a bag of tokens (Weinberger et al., 2009).

    Each token lands in one of `dimension` buckets with a +1/-1 sign taken from
    a keyed blake2b digest; the accumulated vector is L2-normalized.
    """

    def __init__(
        self,
        dimension: int = DEFAULT_DIMENSION,
        seed: int = DEFAULT_HASH_SEED,
        tokenizer: Optional[Tokenizer] = None,
    ):
        if dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {dimension}")
        self._dimension = dimension
        self._seed = seed
        self._tokenizer = tokenizer or Tokenizer()

    @property
    def provider_id(self) -> str:
        return f"hashing-d{self._dimension}-s{self._seed}"

    @property
    def dimension(self) -> int:
        return self._dimension

    def accumulate(self, text: str) -> np.ndarray:
        """Unnormalized bucket counts."""
        vector = np.zeros(self._dimension, dtype=np.float64)
        for token in self._tokenizer.tokenize(text):
            bucket, sign = _signed_bucket(token, self._seed, self._dimension)
            vector[bucket] += sign
        return vector

    def embed(self, text: str) -> np.ndarray:
        return l2_normalize(self.accumulate(text))


class RemoteEmbeddingProvider(EmbeddingProvider):
    """Adapter for any service speaking {texts} -> {vectors}."""

    def __init__(self, client: ModelServiceClient, dimension: int, model: str):
        self._client = client
        self._dimension = dimension
        self._model = model

    @staticmethod
    def connect(
        url: str, api_key: Optional[str] = None, timeout: float = 120.0
    ) -> "RemoteEmbeddingProvider":
        client = ModelServiceClient.make(url, api_key, timeout)
        info = client.embedding_info()
        return RemoteEmbeddingProvider(client, info.dimension, info.model)

    @property
    def provider_id(self) -> str:
        return f"remote-{self._model}-d{self._dimension}"

    @property
    def dimension(self) -> int:
        return self._dimension

    def embed(self, text: str) -> np.ndarray:
        return self.embed_many([text])[0]

    def embed_many(self, texts: Sequence[str]) -> np.ndarray:
        if not texts:
            return np.zeros((0, self._dimension), dtype=np.float64)
        vectors: List[np.ndarray] = []
        for raw in self._client.embed(list(texts)):
            vector = np.asarray(raw, dtype=np.float64)
            if vector.shape != (self._dimension,):
                raise DimensionMismatchError(
                    f"{self.provider_id} returned a vector of shape {vector.shape}"
                )
            vectors.append(l2_normalize(vector))
        return np.vstack(vectors)
