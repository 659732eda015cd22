import json

import numpy as np
import pytest

from internal.domain.errors import (
    ConfigurationError,
    VersionMismatchError,
    WorkspaceLockedError,
)
from internal.domain.evaluation.judgment import EvalQuery
from internal.domain.query.decomposition import Constraint, DecomposedQuery
from internal.infra.workspace import Workspace
from internal.modeling.bm25 import InvertedIndex
from internal.modeling.embedding import HashingEmbedder
from internal.retrieval.semantic import VectorIndex
from tests.conftest import make_catalog, make_product


@pytest.fixture
def workspace(tmp_path) -> Workspace:
    return Workspace(tmp_path / "ws")


class TestCatalogArtifact:
    def test_round_trip(self, workspace, sample_catalog):
        workspace.save_catalog(sample_catalog)
        loaded = workspace.load_catalog()
        assert loaded.version == sample_catalog.version
        assert loaded.ids == sample_catalog.ids
        assert loaded.get("t004") == sample_catalog.get("t004")

    def test_tampered_stamp(self, workspace, sample_catalog):
        path = workspace.save_catalog(sample_catalog)
        record = json.loads(path.read_text(encoding="utf-8"))
        record["version"] = "0" * 16
        path.write_text(json.dumps(record), encoding="utf-8")
        with pytest.raises(VersionMismatchError):
            workspace.load_catalog()

    def test_missing(self, workspace):
        with pytest.raises(ConfigurationError):
            workspace.load_catalog()

    def test_no_temporary_files_left(self, workspace, sample_catalog):
        workspace.save_catalog(sample_catalog)
        assert [p.name for p in workspace.root.iterdir()] == [Workspace.CATALOG]


class TestIndexArtifacts:
    def test_round_trip(self, workspace, sample_catalog):
        lexical = InvertedIndex.make(sample_catalog)
        vector = VectorIndex.make(sample_catalog, HashingEmbedder())
        workspace.save_indexes(lexical, vector)
        loaded_lexical, loaded_vector = workspace.load_indexes(sample_catalog)
        assert loaded_vector.provider_id == vector.provider_id
        for key in ("matrix", "owners"):
            np.testing.assert_array_equal(
                loaded_vector.to_state()[key], vector.to_state()[key]
            )
        for pid in sample_catalog.ids:
            assert loaded_lexical.score(["dress"], pid) == lexical.score(["dress"], pid)

    def test_stale_indexes(self, workspace, sample_catalog):
        other = make_catalog(make_product("x", "kite"))
        workspace.save_indexes(
            InvertedIndex.make(other), VectorIndex.make(other, HashingEmbedder())
        )
        with pytest.raises(VersionMismatchError):
            workspace.load_indexes(sample_catalog)

    def test_missing(self, workspace, sample_catalog):
        with pytest.raises(ConfigurationError):
            workspace.load_indexes(sample_catalog)


class TestLock:
    def test_second_holder_is_refused(self, workspace):
        with workspace.lock():
            assert workspace.path(Workspace.LOCK).exists()
            with pytest.raises(WorkspaceLockedError):
                with workspace.lock():
                    pass
        assert not workspace.path(Workspace.LOCK).exists()

    def test_released_on_error(self, workspace):
        with pytest.raises(RuntimeError):
            with workspace.lock():
                raise RuntimeError("boom")
        with workspace.lock():
            pass


class TestQueries:
    def test_jsonl_round_trip(self, workspace):
        intended = DecomposedQuery(
            raw="a kite under $20",
            constraints=(Constraint.at_most("price", 20),),
            semantic_residual="a kite",
        )
        queries = [
            EvalQuery("q000", "a kite under $20", intended, frozenset({"p1", "p2"})),
            EvalQuery("q001", "a doll"),
        ]
        path = workspace.save_queries(queries)
        assert workspace.load_queries(path) == queries

    def test_text_file(self, workspace, tmp_path):
        path = tmp_path / "queries.txt"
        path.write_text("# header\nblack dress\n\n  red kite  \n", encoding="utf-8")
        queries = workspace.load_queries(path)
        assert [(q.query_id, q.text) for q in queries] == [
            ("q000", "black dress"),
            ("q001", "red kite"),
        ]
        assert all(q.relevant_ids is None for q in queries)

    def test_missing_text_file(self, workspace, tmp_path):
        with pytest.raises(ConfigurationError):
            workspace.load_queries(tmp_path / "absent.txt")
