import json
import logging
import os
import pickle
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Tuple

from internal.domain.catalog.product import Catalog
from internal.domain.errors import (
    ConfigurationError,
    VersionMismatchError,
    WorkspaceLockedError,
)
from internal.domain.evaluation.judgment import (
    EvalQuery,
    Judgment,
    MetricReport,
    RunRecord,
)
from internal.modeling.bm25 import InvertedIndex
from internal.retrieval.semantic import VectorIndex

logger = logging.getLogger(__name__)

CATALOG_FORMAT_VERSION = 1
PICKLE_PROTOCOL = 5


def _dumps(record: Any) -> str:
    return json.dumps(record, sort_keys=True, ensure_ascii=False)


class Workspace:
    """Artifact directory: catalog, indexes, runs, judgments and reports."""

    CATALOG = "catalog.json"
    LEXICAL_INDEX = "lexical_index.pkl"
    VECTOR_INDEX = "vector_index.pkl"
    QUERIES = "queries.jsonl"
    JUDGMENTS = "judgments.jsonl"
    REPORT_JSON = "report.json"
    REPORT_TABLE = "report.txt"
    REPORT_PER_QUERY = "report_per_query.csv"
    REPORT_FIGURE = "report.png"
    LOCK = ".lock"

    def __init__(self, root: Path):
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def run_path(self, strategy: str) -> Path:
        return self.root / "runs" / f"{strategy}.jsonl"

    def _write_text(self, name: str, text: str) -> Path:
        target = self.root / name
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, target)
        logger.info("Wrote %s", target)
        return target

    def _write_bytes(self, name: str, payload: bytes) -> Path:
        target = self.root / name
        target.parent.mkdir(parents=True, exist_ok=True)
        tmp = target.with_name(target.name + ".tmp")
        tmp.write_bytes(payload)
        os.replace(tmp, target)
        logger.info("Wrote %s", target)
        return target

    def _write_jsonl(self, name: str, records: Iterable[Dict[str, Any]]) -> Path:
        return self._write_text(name, "".join(_dumps(r) + "\n" for r in records))

    def _read_jsonl(self, path: Path) -> List[Dict[str, Any]]:
        if not path.exists():
            raise ConfigurationError(f"Missing artifact {path}")
        lines = path.read_text(encoding="utf-8").splitlines()
        return [json.loads(line) for line in lines if line.strip()]

    @contextmanager
    def lock(self) -> Iterator[None]:
        """Exclusive lock for commands that write the catalog or indexes."""
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.path(self.LOCK)
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkspaceLockedError(
                f"Workspace {self.root} is locked ({lock_path} exists)"
            ) from None
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield
        finally:
            lock_path.unlink(missing_ok=True)

    # catalog

    def save_catalog(self, catalog: Catalog) -> Path:
        record = {
            "format_version": CATALOG_FORMAT_VERSION,
            "version": catalog.version,
            "catalog": catalog.to_record(),
        }
        return self._write_text(self.CATALOG, _dumps(record) + "\n")

    def load_catalog(self) -> Catalog:
        path = self.path(self.CATALOG)
        if not path.exists():
            raise ConfigurationError(
                f"No catalog in {self.root}; run `qam ingest` first"
            )
        record = json.loads(path.read_text(encoding="utf-8"))
        if record.get("format_version") != CATALOG_FORMAT_VERSION:
            raise VersionMismatchError(
                f"catalog format {record.get('format_version')} "
                f"!= supported {CATALOG_FORMAT_VERSION}"
            )
        catalog = Catalog.from_record(record["catalog"])
        if catalog.version != record.get("version"):
            raise VersionMismatchError(
                f"stale catalog stamp: {path} records {record.get('version')}, "
                f"content hashes to {catalog.version}"
            )
        return catalog

    # indexes

    def save_indexes(self, lexical: InvertedIndex, vector: VectorIndex) -> List[Path]:
        return [
            self._write_bytes(
                self.LEXICAL_INDEX, pickle.dumps(lexical.to_state(), PICKLE_PROTOCOL)
            ),
            self._write_bytes(
                self.VECTOR_INDEX, pickle.dumps(vector.to_state(), PICKLE_PROTOCOL)
            ),
        ]

    def _load_state(self, name: str) -> Dict[str, Any]:
        path = self.path(name)
        if not path.exists():
            raise ConfigurationError(f"No {name} in {self.root}; run `qam index` first")
        with open(path, "rb") as f:
            state = pickle.load(f)
        if not isinstance(state, dict):
            raise TypeError(f"{path} does not contain an index state")
        return state

    def load_indexes(self, catalog: Catalog) -> Tuple[InvertedIndex, VectorIndex]:
        lexical = InvertedIndex.from_state(self._load_state(self.LEXICAL_INDEX))
        vector = VectorIndex.from_state(self._load_state(self.VECTOR_INDEX))
        for name, stamp in (
            (self.LEXICAL_INDEX, lexical.catalog_version),
            (self.VECTOR_INDEX, vector.catalog_version),
        ):
            if stamp != catalog.version:
                raise VersionMismatchError(
                    f"{name} was built from catalog {stamp}, "
                    f"workspace catalog is {catalog.version}; run `qam index`"
                )
        return lexical, vector

    # evaluation artifacts

    def save_queries(self, queries: Iterable[EvalQuery]) -> Path:
        return self._write_jsonl(self.QUERIES, (q.to_record() for q in queries))

    def load_queries(self, path: Path) -> List[EvalQuery]:
        """JSON lines of EvalQuery records, or plain text with one query per line."""
        path = Path(path)
        if path.suffix == ".jsonl":
            return [EvalQuery.from_record(r) for r in self._read_jsonl(path)]
        if not path.exists():
            raise ConfigurationError(f"Missing query file {path}")
        lines = [s.strip() for s in path.read_text(encoding="utf-8").splitlines()]
        texts = [s for s in lines if s and not s.startswith("#")]
        return [EvalQuery(f"q{i:03d}", text) for i, text in enumerate(texts)]

    def save_runs(self, strategy: str, records: Iterable[RunRecord]) -> Path:
        name = str(self.run_path(strategy).relative_to(self.root))
        return self._write_jsonl(name, (r.to_record() for r in records))

    def save_judgments(self, judgments: Iterable[Judgment]) -> Path:
        return self._write_jsonl(self.JUDGMENTS, (j.to_record() for j in judgments))

    def save_report(self, report: MetricReport) -> Path:
        return self._write_text(self.REPORT_JSON, _dumps(report.to_record()) + "\n")

    def save_text(self, name: str, text: str) -> Path:
        return self._write_text(name, text)

    def load_report(self) -> MetricReport:
        path = self.path(self.REPORT_JSON)
        if not path.exists():
            raise ConfigurationError(f"No report in {self.root}; run `qam eval` first")
        return MetricReport.from_record(json.loads(path.read_text(encoding="utf-8")))
