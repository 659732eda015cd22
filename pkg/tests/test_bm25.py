import math
from collections import Counter

import numpy as np
import pytest

from internal.domain.errors import (
    ConfigurationError,
    EmptyCatalogError,
    ProductNotFoundError,
)
from internal.modeling.bm25 import (
    InvertedIndex,
    bm25_score,
    build_index,
    search_keyword,
)
from internal.modeling.tokenizer import Tokenizer
from tests.conftest import make_catalog, make_product

VOCAB = ["red", "blue", "toy", "car", "doll", "kite", "train", "wood", "soft", "big"]


def naive_bm25(docs, query_tokens, doc, k1=1.2, b=0.75):
    """Okapi BM25 straight from raw token lists."""
    n = len(docs)
    avg = sum(len(d) for d in docs.values()) / n
    tf = Counter(docs[doc])
    score = 0.0
    for term in query_tokens:
        if tf[term] == 0:
            continue
        df = sum(1 for d in docs.values() if term in d)
        idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
        norm = k1 * (1.0 - b + b * len(docs[doc]) / avg)
        score += idf * tf[term] * (k1 + 1.0) / (tf[term] + norm)
    return score


def random_catalog(rng, size):
    products = []
    for i in range(size):
        words = rng.choice(VOCAB, size=int(rng.integers(0, 7)))
        products.append(make_product(f"p{i:02d}", " ".join(words)))
    return make_catalog(*products)


class TestBuildIndex:
    def test_doc_count_and_lengths(self, toy_cars):
        index = build_index(toy_cars, ["title"])
        assert index.doc_count == 3
        assert index.doc_lengths == {"d1": 3, "d2": 2, "d3": 2}
        assert index.avg_doc_length == pytest.approx(7 / 3, abs=1e-9)

    def test_postings(self, toy_cars):
        index = build_index(toy_cars, ["title"])
        assert index.postings("red") == [("d1", 1), ("d3", 1)]
        assert index.postings("zzz") == []

    def test_empty_title_has_no_postings(self):
        catalog = make_catalog(make_product("a", "red car"), make_product("b", ""))
        index = build_index(catalog, ["title"])
        assert index.doc_lengths["b"] == 0
        assert all(pid != "b" for t in ("red", "car") for pid, _ in index.postings(t))

    def test_empty_catalog(self):
        with pytest.raises(EmptyCatalogError):
            build_index(make_catalog(), ["title"])

    def test_unknown_field(self, toy_cars):
        with pytest.raises(ConfigurationError):
            build_index(toy_cars, ["price"])

    def test_bad_parameters(self, toy_cars):
        with pytest.raises(ConfigurationError):
            build_index(toy_cars, ["title"], k1=0.0)
        with pytest.raises(ConfigurationError):
            build_index(toy_cars, ["title"], b=1.5)

    def test_adding_a_document_keeps_other_frequencies(self, toy_cars):
        before = build_index(toy_cars, ["title"])
        grown = make_catalog(*toy_cars, make_product("d4", "red red red car"))
        after = build_index(grown, ["title"])
        for pid in toy_cars.ids:
            for term in ("red", "car", "toy", "blue"):
                assert before.term_frequency(term, pid) == after.term_frequency(
                    term, pid
                )


class TestBm25Score:
    def test_hand_ordering(self, toy_cars):
        index = build_index(toy_cars, ["title"])
        query = ["red", "car"]
        d1, d2, d3 = (bm25_score(index, query, pid) for pid in ("d1", "d2", "d3"))
        assert d3 > d1 > d2 == 0.0

    def test_hand_values(self, toy_cars):
        index = build_index(toy_cars, ["title"])
        idf = math.log(1.6)
        avg = 7 / 3
        d3 = 2 * idf * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 2 / avg))
        d1 = 2 * idf * 2.2 / (1 + 1.2 * (0.25 + 0.75 * 3 / avg))
        assert bm25_score(index, ["red", "car"], "d3") == pytest.approx(d3, abs=1e-9)
        assert bm25_score(index, ["red", "car"], "d1") == pytest.approx(d1, abs=1e-9)

    def test_single_document(self):
        index = build_index(make_catalog(make_product("a", "red car")), ["title"])
        idf = math.log(1.0 + 0.5 / 1.5)
        expected = 2 * idf * 2.2 / (1.0 + 1.2)
        assert bm25_score(index, ["red", "car"], "a") == pytest.approx(expected)

    def test_no_indexed_terms(self, toy_cars):
        index = build_index(toy_cars, ["title"])
        assert np.all(index.score_all(["zzz"]) == 0.0)

    def test_unknown_product(self, toy_cars):
        index = build_index(toy_cars, ["title"])
        with pytest.raises(ProductNotFoundError):
            bm25_score(index, ["red"], "nope")

    def test_matches_naive_reference(self):
        rng = np.random.default_rng(5)
        tokenizer = Tokenizer()
        for _ in range(100):
            catalog = random_catalog(rng, int(rng.integers(1, 21)))
            docs = {p.id: tokenizer.tokenize(p.title) for p in catalog}
            if not any(docs.values()):
                continue
            index = InvertedIndex.make(catalog, ["title"])
            query = list(rng.choice(VOCAB, size=int(rng.integers(1, 9))))
            all_scores = index.score_all(query)
            for row, pid in enumerate(catalog.ids):
                expected = naive_bm25(docs, query, pid)
                assert index.score(query, pid) == pytest.approx(expected, abs=1e-9)
                assert all_scores[row] == pytest.approx(expected, abs=1e-9)


class TestSearchKeyword:
    def test_top_two(self, toy_cars):
        index = build_index(toy_cars, ["title"])
        results = search_keyword(index, "red car", 2)
        assert [r.product_id for r in results] == ["d3", "d1"]
        assert [r.rank for r in results] == [1, 2]

    def test_no_match(self, toy_cars):
        assert search_keyword(build_index(toy_cars, ["title"]), "zzz", 5) == []

    def test_n_larger_than_corpus(self, toy_cars):
        results = search_keyword(build_index(toy_cars, ["title"]), "toy", 50)
        assert [r.product_id for r in results] == ["d2", "d1"]

    def test_ties_break_by_id(self):
        catalog = make_catalog(
            make_product("b", "red kite"), make_product("a", "red kite")
        )
        results = search_keyword(build_index(catalog, ["title"]), "kite", 5)
        assert [r.product_id for r in results] == ["a", "b"]

    def test_repeated_searches_are_identical(self, toy_cars):
        index = build_index(toy_cars, ["title"])
        assert search_keyword(index, "red car", 3) == search_keyword(
            index, "red car", 3
        )

    def test_state_round_trip_keeps_scores(self, toy_cars):
        index = build_index(toy_cars, ["title"])
        restored = InvertedIndex.from_state(index.to_state())
        assert search_keyword(restored, "red toy car", 3) == search_keyword(
            index, "red toy car", 3
        )
