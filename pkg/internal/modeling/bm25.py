import logging
from collections import Counter
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numba import njit
from scipy.sparse import coo_matrix, csc_matrix

from internal.domain.catalog.product import TEXT_FIELDS, Catalog
from internal.domain.errors import (
    ConfigurationError,
    EmptyCatalogError,
    ProductNotFoundError,
    VersionMismatchError,
)
from internal.domain.search.result import RankedResult, rank_scores
from internal.modeling.tokenizer import Tokenizer

logger = logging.getLogger(__name__)

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75
DEFAULT_INDEXED_FIELDS: Tuple[str, ...] = ("title", "description")


class InvertedIndex:
    """Okapi BM25 index (Robertson & Zaragoza, 2009).

    Term frequencies live in a docs x terms CSC matrix, so column t is the
    postings list of term t. Rows follow ascending product id.
    """

    FORMAT_VERSION = 1

    def __init__(
        self,
        product_ids: List[str],
        vocabulary: Dict[str, int],
        term_frequencies: csc_matrix,
        doc_lengths: np.ndarray,
        fields: Tuple[str, ...],
        tokenizer: Tokenizer,
        catalog_version: str,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
    ):
        if k1 <= 0:
            raise ConfigurationError(f"bm25 k1 must be > 0, got {k1}")
        if not 0.0 <= b <= 1.0:
            raise ConfigurationError(f"bm25 b must be in [0, 1], got {b}")
        self._product_ids = product_ids
        self._row_of = {pid: i for i, pid in enumerate(product_ids)}
        self._vocabulary = vocabulary
        self._tf = term_frequencies
        self._doc_lengths = doc_lengths
        self._fields = fields
        self._tokenizer = tokenizer
        self._catalog_version = catalog_version
        self._k1 = k1
        self._b = b
        self._df = np.diff(term_frequencies.indptr).astype(np.float64)
        n = float(len(product_ids))
        self._idf = np.log1p((n - self._df + 0.5) / (self._df + 0.5))

    @classmethod
    def make(
        cls,
        catalog: Catalog,
        fields: Sequence[str] = DEFAULT_INDEXED_FIELDS,
        tokenizer: Optional[Tokenizer] = None,
        k1: float = DEFAULT_K1,
        b: float = DEFAULT_B,
    ) -> "InvertedIndex":
        if not fields:
            raise ConfigurationError("at least one indexed field is required")
        unknown = [f for f in fields if f not in TEXT_FIELDS]
        if unknown:
            raise ConfigurationError(
                f"Unknown indexed field(s) {unknown}; "
                f"expected some of {list(TEXT_FIELDS)}"
            )
        if len(catalog) == 0:
            raise EmptyCatalogError("cannot build an index over an empty catalog")
        tokenizer = tokenizer or Tokenizer()

        counts = [Counter(tokenizer.tokenize(p.text(fields))) for p in catalog]
        terms = sorted({t for c in counts for t in c})
        vocabulary = {t: i for i, t in enumerate(terms)}

        rows, cols, data = [], [], []
        for row, counter in enumerate(counts):
            for term, tf in counter.items():
                rows.append(row)
                cols.append(vocabulary[term])
                data.append(float(tf))
        shape = (len(counts), len(terms))
        tf_matrix = coo_matrix(
            (
                np.asarray(data, dtype=np.float64),
                (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)),
            ),
            shape=shape,
        ).tocsc()
        tf_matrix.sort_indices()
        doc_lengths = np.asarray([sum(c.values()) for c in counts], dtype=np.float64)

        logger.info(
            "Built BM25 index: %d docs, %d terms, fields=%s",
            shape[0],
            shape[1],
            list(fields),
        )
        return cls(
            product_ids=catalog.ids,
            vocabulary=vocabulary,
            term_frequencies=tf_matrix,
            doc_lengths=doc_lengths,
            fields=tuple(fields),
            tokenizer=tokenizer,
            catalog_version=catalog.version,
            k1=k1,
            b=b,
        )

    @property
    def doc_count(self) -> int:
        return len(self._product_ids)

    @property
    def avg_doc_length(self) -> float:
        if self.doc_count == 0:
            return 0.0
        return float(self._doc_lengths.sum()) / self.doc_count

    @property
    def doc_lengths(self) -> Dict[str, int]:
        return {pid: int(n) for pid, n in zip(self._product_ids, self._doc_lengths)}

    @property
    def product_ids(self) -> List[str]:
        return list(self._product_ids)

    @property
    def fields(self) -> Tuple[str, ...]:
        return self._fields

    @property
    def tokenizer(self) -> Tokenizer:
        return self._tokenizer

    @property
    def catalog_version(self) -> str:
        return self._catalog_version

    @property
    def k1(self) -> float:
        return self._k1

    @property
    def b(self) -> float:
        return self._b

    def postings(self, term: str) -> List[Tuple[str, int]]:
        t = self._vocabulary.get(term)
        if t is None:
            return []
        start, end = self._tf.indptr[t], self._tf.indptr[t + 1]
        return [
            (self._product_ids[d], int(tf))
            for d, tf in zip(self._tf.indices[start:end], self._tf.data[start:end])
        ]

    def term_frequency(self, term: str, product_id: str) -> int:
        row = self.row_of(product_id)
        t = self._vocabulary.get(term)
        return 0 if t is None else int(self._tf[row, t])

    def score(self, query_tokens: Sequence[str], product_id: str) -> float:
        row = self.row_of(product_id)
        dl = self._doc_lengths[row]
        total = 0.0
        for token in query_tokens:
            t = self._vocabulary.get(token)
            if t is None:
                continue
            tf = float(self._tf[row, t])
            if tf == 0.0:
                continue
            norm = self._k1 * (1.0 - self._b + self._b * dl / self.avg_doc_length)
            total += self._idf[t] * tf * (self._k1 + 1.0) / (tf + norm)
        return total

    def score_all(self, query_tokens: Sequence[str]) -> np.ndarray:
        term_ids = np.asarray(
            [self._vocabulary[t] for t in query_tokens if t in self._vocabulary],
            dtype=np.int64,
        )
        scores = np.zeros(self.doc_count, dtype=np.float64)
        if term_ids.size == 0:
            return scores
        InvertedIndex._accumulate(
            self._tf.indptr.astype(np.int64),
            self._tf.indices.astype(np.int64),
            self._tf.data,
            term_ids,
            self._idf,
            self._doc_lengths,
            self.avg_doc_length,
            self._k1,
            self._b,
            scores,
        )
        return scores

    @staticmethod
    @njit
    def _accumulate(
        indptr: np.ndarray,
        indices: np.ndarray,
        data: np.ndarray,
        term_ids: np.ndarray,
        idf: np.ndarray,
        doc_lengths: np.ndarray,
        avg_dl: float,
        k1: float,
        b: float,
        out: np.ndarray,
    ) -> None:
        for t in term_ids:
            for p in range(indptr[t], indptr[t + 1]):
                d = indices[p]
                tf = data[p]
                norm = k1 * (1.0 - b + b * doc_lengths[d] / avg_dl)
                out[d] += idf[t] * tf * (k1 + 1.0) / (tf + norm)

    def row_of(self, product_id: str) -> int:
        try:
            return self._row_of[product_id]
        except KeyError:
            raise ProductNotFoundError(product_id) from None

    def to_state(self) -> Dict[str, Any]:
        return {
            "format_version": self.FORMAT_VERSION,
            "catalog_version": self._catalog_version,
            "product_ids": list(self._product_ids),
            "vocabulary": sorted(self._vocabulary, key=self._vocabulary.__getitem__),
            "indptr": self._tf.indptr.astype(np.int64),
            "indices": self._tf.indices.astype(np.int64),
            "data": self._tf.data.astype(np.float64),
            "doc_lengths": self._doc_lengths,
            "fields": list(self._fields),
            "tokenizer": {
                "lowercase": self._tokenizer.lowercase,
                "pattern": self._tokenizer.pattern,
                "stem": self._tokenizer.stem,
            },
            "k1": self._k1,
            "b": self._b,
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "InvertedIndex":
        if state.get("format_version") != cls.FORMAT_VERSION:
            raise VersionMismatchError(
                f"lexical index format {state.get('format_version')} "
                f"!= supported {cls.FORMAT_VERSION}"
            )
        terms = state["vocabulary"]
        shape = (len(state["product_ids"]), len(terms))
        tf_matrix = csc_matrix(
            (state["data"], state["indices"], state["indptr"]), shape=shape
        )
        return cls(
            product_ids=list(state["product_ids"]),
            vocabulary={t: i for i, t in enumerate(terms)},
            term_frequencies=tf_matrix,
            doc_lengths=np.asarray(state["doc_lengths"], dtype=np.float64),
            fields=tuple(state["fields"]),
            tokenizer=Tokenizer(**state["tokenizer"]),
            catalog_version=state["catalog_version"],
            k1=state["k1"],
            b=state["b"],
        )


def build_index(
    catalog: Catalog,
    fields: Sequence[str] = DEFAULT_INDEXED_FIELDS,
    tokenizer: Optional[Tokenizer] = None,
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> InvertedIndex:
    return InvertedIndex.make(catalog, fields, tokenizer, k1, b)


def bm25_score(
    index: InvertedIndex, query_tokens: Sequence[str], product_id: str
) -> float:
    return index.score(query_tokens, product_id)


def search_keyword(index: InvertedIndex, query: str, n: int) -> List[RankedResult]:
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    scores = index.score_all(index.tokenizer.tokenize(query))
    ids = index.product_ids
    hits = {ids[i]: float(scores[i]) for i in np.flatnonzero(scores > 0.0)}
    return rank_scores(hits, n)
