import pytest

from internal.domain.catalog.product import TEXT_FIELDS
from internal.evaluation.synthetic import generate_synthetic_corpus
from internal.modeling.decomposer import RuleBasedDecomposer
from internal.modeling.tokenizer import Tokenizer, content_tokens
from internal.retrieval.filtering import FilterPolicy, filter_catalog


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic_corpus(seed=7, n_products=120, n_queries=30)


class TestSyntheticCorpus:
    def test_sizes_and_ids(self, corpus):
        assert len(corpus.catalog) == 120
        assert corpus.catalog.ids[0] == "p0000"
        assert [q.query_id for q in corpus.queries][:2] == ["q000", "q001"]

    def test_same_seed_same_corpus(self, corpus):
        again = generate_synthetic_corpus(seed=7, n_products=120, n_queries=30)
        assert again.catalog.version == corpus.catalog.version
        assert [q.to_record() for q in again.queries] == [
            q.to_record() for q in corpus.queries
        ]

    def test_other_seed_other_corpus(self, corpus):
        other = generate_synthetic_corpus(seed=8, n_products=120, n_queries=30)
        assert other.catalog.version != corpus.catalog.version

    def test_ground_truth_is_never_empty(self, corpus):
        assert all(q.relevant_ids for q in corpus.queries)

    def test_ground_truth_matches_brute_force(self, corpus):
        tokenizer = Tokenizer()
        policy = FilterPolicy()
        for q in corpus.queries:
            residual = tokenizer.tokenize(q.intended.semantic_residual)
            wanted = set(content_tokens(residual))
            passing = filter_catalog(corpus.catalog, q.intended.constraints, policy)
            expected = {
                pid
                for pid in passing
                if wanted
                & set(tokenizer.tokenize(corpus.catalog.get(pid).text(TEXT_FIELDS)))
            }
            assert q.relevant_ids == expected

    def test_rules_recover_the_intended_decomposition(self, corpus):
        rules = RuleBasedDecomposer.make(corpus.catalog)
        for q in corpus.queries:
            assert rules.decompose(q.text) == q.intended

    def test_min_relevant_is_a_target(self):
        corpus = generate_synthetic_corpus(
            seed=1, n_products=150, n_queries=10, min_relevant=3
        )
        assert sum(len(q.relevant_ids) >= 3 for q in corpus.queries) >= 8

    def test_sizes_must_be_positive(self):
        with pytest.raises(ValueError):
            generate_synthetic_corpus(seed=1, n_products=0, n_queries=1)
