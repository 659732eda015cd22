import numpy as np
import pytest

from internal.domain.catalog.product import Review
from internal.domain.errors import DimensionMismatchError, ProviderMismatchError
from internal.modeling.embedding import EmbeddingProvider, HashingEmbedder, cosine
from internal.retrieval.semantic import (
    Pooling,
    VectorIndex,
    build_vector_index,
    search_semantic,
)
from tests.conftest import make_catalog, make_product

WORDS = ["red", "blue", "toy", "car", "doll", "kite", "soft", "wood", "fast", "tiny"]


@pytest.fixture
def embedder() -> HashingEmbedder:
    return HashingEmbedder()


class TestHashingEmbedder:
    def test_empty_text_is_zero(self, embedder):
        vector = embedder.embed("")
        assert vector.shape == (256,)
        assert not vector.any()

    def test_unit_norm(self, embedder):
        assert np.linalg.norm(embedder.embed("red toy car")) == pytest.approx(1.0)

    def test_token_order_does_not_matter(self, embedder):
        np.testing.assert_array_equal(
            embedder.embed("red car"), embedder.embed("car red")
        )

    def test_shared_tokens_are_closer(self, embedder):
        anchor = embedder.embed("red toy car")
        near = cosine(anchor, embedder.embed("red car"))
        far = cosine(anchor, embedder.embed("blue dress"))
        assert near > far

    def test_scaling_does_not_change_cosine_order(self, embedder):
        texts = ["red car", "blue toy", "red toy car", "soft doll"]
        query = embedder.accumulate("red car toy")
        raw = [embedder.accumulate(t) for t in texts]
        plain = np.argsort([-cosine(query, v) for v in raw], kind="stable")
        scaled = np.argsort(
            [-cosine(query * 7.0, v * 3.0) for v in raw], kind="stable"
        )
        np.testing.assert_array_equal(plain, scaled)

    def test_seed_changes_provider(self):
        one, two = HashingEmbedder(seed=1), HashingEmbedder(seed=2)
        assert one.provider_id != two.provider_id

    def test_factory(self):
        assert isinstance(EmbeddingProvider.make("hashing"), HashingEmbedder)
        with pytest.raises(ValueError):
            EmbeddingProvider.make("word2vec")


class TestCosine:
    def test_identity(self):
        v = np.array([0.3, -1.2, 4.0])
        assert cosine(v, v) == pytest.approx(1.0)

    def test_antipodal(self):
        v = np.array([0.3, -1.2, 4.0])
        assert cosine(v, -v) == pytest.approx(-1.0)

    def test_orthogonal(self):
        assert cosine(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0

    def test_zero_vector(self):
        assert cosine(np.zeros(3), np.ones(3)) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            cosine(np.ones(2), np.ones(3))


class TestSearchSemantic:
    def test_singleton_candidates(self, embedder):
        catalog = make_catalog(make_product("a", "red car"), make_product("b", "doll"))
        index = build_vector_index(catalog, embedder)
        results = search_semantic(index, embedder, "red car", 5, frozenset({"b"}))
        assert [r.product_id for r in results] == ["b"]

    def test_identical_text_scores_one(self, embedder):
        catalog = make_catalog(
            make_product("a", "soft blue doll"), make_product("b", "fast red car")
        )
        index = build_vector_index(catalog, embedder)
        top = search_semantic(index, embedder, "fast red car", 2)[0]
        assert top.product_id == "b"
        assert top.score == pytest.approx(1.0)

    def test_provider_mismatch(self, embedder):
        catalog = make_catalog(make_product("a", "red car"))
        index = build_vector_index(catalog, embedder)
        with pytest.raises(ProviderMismatchError):
            search_semantic(index, HashingEmbedder(seed=99), "red car", 1)

    def test_matches_exhaustive_sort(self, embedder):
        rng = np.random.default_rng(3)
        for _ in range(10):
            products = [
                make_product(f"p{i:02d}", " ".join(rng.choice(WORDS, size=4)))
                for i in range(20)
            ]
            catalog = make_catalog(*products)
            index = build_vector_index(catalog, embedder)
            query = " ".join(rng.choice(WORDS, size=3))
            q = embedder.embed(query)
            oracle = sorted(
                (float(embedder.embed(p.title) @ q) for p in catalog), reverse=True
            )
            results = search_semantic(index, embedder, query, 8)
            assert [r.score for r in results] == pytest.approx(oracle[:8], abs=1e-12)
            for r in results:
                expected = float(embedder.embed(catalog.get(r.product_id).title) @ q)
                assert r.score == pytest.approx(expected, abs=1e-12)

    def test_results_stay_inside_candidates(self, embedder):
        rng = np.random.default_rng(8)
        catalog = make_catalog(
            *(make_product(f"p{i}", " ".join(rng.choice(WORDS, 3))) for i in range(15))
        )
        index = build_vector_index(catalog, embedder)
        for _ in range(10):
            size = int(rng.integers(1, 15))
            candidates = frozenset(rng.choice(catalog.ids, size=size, replace=False))
            results = search_semantic(index, embedder, "red toy", 10, candidates)
            assert {r.product_id for r in results} <= candidates

    def test_max_review_pooling(self, embedder):
        reviews = (Review("a", "flies high in wind"), Review("a", "bright colors"))
        catalog = make_catalog(
            make_product("a", "plain kite", reviews=reviews),
            make_product("b", "plain doll"),
        )
        index = VectorIndex.make(catalog, embedder, pooling=Pooling.MaxReview)
        state = index.to_state()
        assert state["matrix"].shape == (4, 256)
        assert np.bincount(state["owners"]).tolist() == [3, 1]
        top = search_semantic(index, embedder, "flies high in wind", 2)[0]
        assert top.product_id == "a"
        assert top.score == pytest.approx(1.0)

    def test_state_round_trip(self, embedder):
        catalog = make_catalog(make_product("a", "red car"), make_product("b", "doll"))
        index = build_vector_index(catalog, embedder)
        restored = VectorIndex.from_state(index.to_state())
        assert search_semantic(restored, embedder, "car", 2) == search_semantic(
            index, embedder, "car", 2
        )
