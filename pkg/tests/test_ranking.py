from math import fsum

import numpy as np
import pytest

from internal.domain.errors import ProductNotFoundError
from internal.domain.search.result import RankedResult
from internal.modeling.interaction_scorer import InteractionScorer, TokenOverlapScorer
from internal.retrieval.ranking import rerank, rrf_fuse
from tests.conftest import make_catalog, make_product

WORDS = ["red", "blue", "toy", "car", "doll", "kite", "soft", "wood"]


def ranked(*ids):
    return [RankedResult(pid, 1.0 / (i + 1), i + 1) for i, pid in enumerate(ids)]


class TestTokenOverlapScorer:
    def test_query_equal_to_title(self):
        scorer = TokenOverlapScorer()
        score = scorer.score("red car", make_product("a", "Red Car"))
        assert score == pytest.approx(1.0)

    def test_no_shared_tokens(self):
        scorer = TokenOverlapScorer()
        assert scorer.score("blue doll", make_product("a", "red car")) == 0.0

    def test_hand_value(self):
        scorer = TokenOverlapScorer()
        score = scorer.score("red car", make_product("a", "red car wash"))
        assert score == pytest.approx(0.7 * 0.8 + 0.3 * 1.0)

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValueError):
            TokenOverlapScorer(overlap_weight=0.5, title_weight=0.3)

    def test_factory(self):
        assert isinstance(InteractionScorer.make("overlap"), TokenOverlapScorer)
        with pytest.raises(ValueError):
            InteractionScorer.make("remote")


class TestRerank:
    def test_single_candidate(self):
        catalog = make_catalog(make_product("a", "kite"))
        results = rerank(TokenOverlapScorer(), "red car", ["a"], catalog, 5)
        assert [(r.product_id, r.rank) for r in results] == [("a", 1)]

    def test_ties_break_by_id(self):
        catalog = make_catalog(
            make_product("b", "red car"), make_product("a", "red car")
        )
        results = rerank(TokenOverlapScorer(), "red car", ["b", "a"], catalog, 5)
        assert [r.product_id for r in results] == ["a", "b"]

    def test_unknown_candidate(self):
        catalog = make_catalog(make_product("a", "kite"))
        with pytest.raises(ProductNotFoundError):
            rerank(TokenOverlapScorer(), "kite", ["a", "zz"], catalog, 5)

    def test_matches_exhaustive_sort(self):
        rng = np.random.default_rng(4)
        scorer = TokenOverlapScorer()
        for _ in range(20):
            catalog = make_catalog(
                *(
                    make_product(f"p{i:02d}", " ".join(rng.choice(WORDS, size=3)))
                    for i in range(12)
                )
            )
            size = int(rng.integers(1, 12))
            candidates = list(rng.choice(catalog.ids, size=size, replace=False))
            query = " ".join(rng.choice(WORDS, size=2))
            oracle = sorted(
                candidates,
                key=lambda pid: (-scorer.score(query, catalog.get(pid)), pid),
            )
            results = rerank(scorer, query, candidates, catalog, 5)
            assert [r.product_id for r in results] == oracle[:5]
            assert {r.product_id for r in results} <= set(candidates)


class TestRrfFuse:
    def test_single_list_keeps_order(self):
        fused = rrf_fuse([ranked("c", "a", "b")], 60, 3)
        assert [r.product_id for r in fused] == ["c", "a", "b"]

    def test_swapped_lists_tie_and_break_by_id(self):
        fused = rrf_fuse([ranked("y", "x"), ranked("x", "y")], 60, 2)
        assert [r.product_id for r in fused] == ["x", "y"]
        assert fused[0].score == fused[1].score == fsum([1 / 61, 1 / 62])

    def test_two_second_places_beat_one_first(self):
        fused = rrf_fuse([ranked("solo", "both"), ranked("other", "both")], 60, 3)
        scores = {r.product_id: r.score for r in fused}
        assert scores["both"] == pytest.approx(2 / 62)
        assert scores["solo"] == pytest.approx(1 / 61)
        assert fused[0].product_id == "both"

    def test_list_order_does_not_matter(self):
        lists = [ranked("a", "b", "c"), ranked("c", "d"), ranked("b", "e", "a")]
        forward = rrf_fuse(lists, 60, 10)
        backward = rrf_fuse(list(reversed(lists)), 60, 10)
        assert {r.product_id: r.score for r in forward} == {
            r.product_id: r.score for r in backward
        }

    def test_only_ranks_matter(self):
        a = ranked("a", "b", "c")
        rescored = [RankedResult(r.product_id, r.score * 100 + 3, r.rank) for r in a]
        expected = rrf_fuse([a, ranked("c")], 60, 5)
        assert rrf_fuse([rescored, ranked("c")], 60, 5) == expected

    def test_empty_lists(self):
        assert rrf_fuse([[], []], 60, 5) == []
