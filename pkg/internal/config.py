import os
import tomllib
from pathlib import Path
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from internal.domain.errors import ConfigurationError
from internal.modeling.tokenizer import DEFAULT_TOKEN_PATTERN

WORKSPACE_ENV = "QAM_WORKSPACE"
DEFAULT_WORKSPACE = Path("workspace")

TextField = Literal["title", "description", "reviews"]


class Config(BaseModel):
    """Flat, fully defaulted settings; an empty file is a valid config."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    # catalog
    catalog_path: Optional[Path] = None
    catalog_format: Literal["jsonl", "csv"] = "jsonl"
    csv_mapping_path: Optional[Path] = None

    # lexical
    indexed_fields: List[TextField] = Field(
        default_factory=lambda: ["title", "description"], min_length=1
    )
    bm25_k1: float = Field(1.2, gt=0)
    bm25_b: float = Field(0.75, ge=0, le=1)
    token_pattern: str = DEFAULT_TOKEN_PATTERN
    lowercase: bool = True
    stem: bool = False

    # semantic
    embedding_provider: Literal["hashing", "remote"] = "hashing"
    embedding_dimension: int = Field(256, ge=1)
    embedding_seed: int = 20250115
    embedding_url: Optional[str] = None
    embedding_fields: List[TextField] = Field(
        default_factory=lambda: ["title", "description", "reviews"], min_length=1
    )
    embedding_pooling: Literal["concat", "max_review"] = "concat"

    # query decomposition
    decomposer: Literal["rule", "remote"] = "rule"
    decomposer_url: Optional[str] = None
    top_rated_threshold: float = Field(4.0, ge=0, le=5)

    # reranking
    scorer: Literal["overlap", "remote"] = "overlap"
    scorer_url: Optional[str] = None
    overlap_weight: float = Field(0.7, ge=0, le=1)
    title_weight: float = Field(0.3, ge=0, le=1)

    # metadata filter
    numeric_slack: float = Field(0.20, ge=0, lt=1)
    around_slack: float = Field(0.20, ge=0, lt=1)
    age_slack: float = Field(0.0, ge=0, lt=1)
    missing_field_behavior: Literal["exclude", "include"] = "exclude"

    # pipeline
    rrf_k: float = Field(60.0, gt=0)
    rerank_shortlist: int = Field(50, ge=0)
    hybrid_depth: int = Field(50, ge=1)
    qam_shortlist: int = Field(50, ge=0)
    rescue_unfiltered: bool = False
    result_size: int = Field(10, ge=1)

    # evaluation
    k_set: List[int] = Field(default_factory=lambda: list(range(1, 11)), min_length=1)
    seed: int = 0
    judge: Literal["deterministic", "remote"] = "deterministic"
    judge_url: Optional[str] = None
    judge_min_overlap: int = Field(1, ge=1)
    synthetic_products: int = Field(200, ge=1)
    synthetic_queries: int = Field(50, ge=1)
    synthetic_min_relevant: int = Field(5, ge=1)

    request_timeout: float = Field(120.0, gt=0)
    # sent as the Authorization header to every remote model service
    service_api_key: Optional[str] = None

    @model_validator(mode="after")
    def _check(self) -> "Config":
        if any(k < 1 for k in self.k_set):
            raise ValueError("k_set values must be >= 1")
        if abs(self.overlap_weight + self.title_weight - 1.0) > 1e-9:
            raise ValueError("overlap_weight + title_weight must equal 1")
        for backend, url_key in (
            (self.embedding_provider, "embedding_url"),
            (self.decomposer, "decomposer_url"),
            (self.scorer, "scorer_url"),
            (self.judge, "judge_url"),
        ):
            if backend == "remote" and not getattr(self, url_key):
                raise ValueError(f"{url_key} is required for a remote backend")
        if self.catalog_format == "csv" and self.catalog_path is not None:
            if self.csv_mapping_path is None:
                raise ValueError("csv_mapping_path is required for csv catalogs")
        return self

    def resolve_paths(self, base: Path) -> "Config":
        """Relative paths are taken from the config file's directory."""
        updates = {}
        for key in ("catalog_path", "csv_mapping_path"):
            value = getattr(self, key)
            if value is not None and not value.is_absolute():
                updates[key] = base / value
        return self.model_copy(update=updates)


def load_config(path: Optional[Path] = None, seed: Optional[int] = None) -> Config:
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as f:
                data = tomllib.load(f)
        except OSError as exc:
            raise ConfigurationError(f"Cannot read config {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigurationError(f"Invalid TOML in {path}: {exc}") from exc
    if seed is not None:
        data["seed"] = seed
    try:
        config = Config.model_validate(data)
    except ValidationError as exc:
        where = path if path is not None else "defaults"
        raise ConfigurationError(f"Invalid config ({where}):\n{exc}") from exc
    if path is not None:
        config = config.resolve_paths(Path(path).resolve().parent)
    return config


def resolve_workspace(flag: Optional[Path] = None) -> Path:
    if flag is not None:
        return Path(flag)
    env = os.environ.get(WORKSPACE_ENV)
    if env:
        return Path(env)
    return DEFAULT_WORKSPACE
