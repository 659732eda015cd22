import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple

import pandas as pd

from internal.domain.catalog.product import Catalog, Product
from internal.domain.errors import (
    ConfigurationError,
    EmptyCatalogError,
    IngestError,
    InvalidRecordError,
)
from internal.provider.attributes import extract_attributes

logger = logging.getLogger(__name__)

RECORD_KEYS = (
    "id", "title", "description", "brand", "color", "material", "price",
    "rating", "min_age", "max_age", "categories", "reviews",
)  # fmt: skip
LIST_SEPARATOR = "|"


class CatalogFormat(Enum):
    Jsonl = "jsonl"
    Csv = "csv"


@dataclass
class IngestReport:
    path: str
    records_read: int = 0
    accepted: int = 0
    warnings: List[str] = field(default_factory=list)

    @property
    def warning_count(self) -> int:
        return len(self.warnings)

    def warn(self, where: str, reason: str) -> None:
        message = f"{self.path}:{where}: {reason}"
        logger.warning("Rejected record %s", message)
        self.warnings.append(message)


def _blank(value: Any) -> bool:
    return value is None or (isinstance(value, str) and not value.strip())


def enrich_record(record: Dict[str, Any]) -> Dict[str, Any]:
    """Fill absent brand / color / age range from the free text.

    Explicit values win; the age range is only filled when both ends are absent.
    """
    found = extract_attributes(
        str(record.get("description") or ""), str(record.get("title") or "")
    )
    enriched = dict(record)
    for key in ("brand", "color"):
        if _blank(enriched.get(key)) and key in found:
            enriched[key] = found[key]
    if _blank(enriched.get("min_age")) and _blank(enriched.get("max_age")):
        for key in ("min_age", "max_age"):
            if key in found:
                enriched[key] = found[key]
    return enriched


def read_mapping(path: Path) -> Dict[str, str]:
    """key=column lines; blank lines and # comments are skipped."""
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IngestError(f"Cannot read CSV mapping {path}: {exc}") from exc
    mapping: Dict[str, str] = {}
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, column = line.partition("=")
        key, column = key.strip(), column.strip()
        if not sep or not key or not column:
            raise ConfigurationError(f"{path}:{number}: expected key=column")
        if key not in RECORD_KEYS:
            raise ConfigurationError(
                f"{path}:{number}: unknown key {key!r}; expected one of {RECORD_KEYS}"
            )
        mapping[key] = column
    for required in ("id", "title"):
        if required not in mapping:
            raise ConfigurationError(f"{path}: mapping must declare {required!r}")
    return mapping


class CatalogProvider:
    def __init__(
        self,
        path: Path,
        catalog_format: CatalogFormat = CatalogFormat.Jsonl,
        mapping_path: Optional[Path] = None,
    ):
        self.path = Path(path)
        self.catalog_format = catalog_format
        self.mapping_path = mapping_path
        if catalog_format is CatalogFormat.Csv and mapping_path is None:
            raise ConfigurationError("CSV ingest requires a column mapping file")

    def get(self) -> Tuple[Catalog, IngestReport]:
        report = IngestReport(path=str(self.path))
        products: Dict[str, Product] = {}
        for where, record in self._records(report):
            report.records_read += 1
            try:
                product = Product.from_record(enrich_record(record))
            except (
                InvalidRecordError,
                AttributeError,
                KeyError,
                TypeError,
                ValueError,
            ) as exc:
                report.warn(where, f"{type(exc).__name__}: {exc}")
                continue
            if product.id in products:
                report.warn(where, f"duplicate id {product.id!r}")
                continue
            products[product.id] = product

        if not products:
            raise EmptyCatalogError(f"No valid records in {self.path}")
        report.accepted = len(products)
        logger.info(
            "Ingested %d products from %s (%d read, %d warnings)",
            report.accepted,
            self.path,
            report.records_read,
            report.warning_count,
        )
        return Catalog(products), report

    def _records(self, report: IngestReport) -> Iterator[Tuple[str, Dict[str, Any]]]:
        match self.catalog_format:
            case CatalogFormat.Jsonl:
                yield from self._jsonl_records(report)
            case CatalogFormat.Csv:
                yield from self._csv_records()

    def _jsonl_records(
        self, report: IngestReport
    ) -> Iterator[Tuple[str, Dict[str, Any]]]:
        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except (OSError, UnicodeDecodeError) as exc:
            raise IngestError(f"Cannot read catalog {self.path}: {exc}") from exc
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                report.records_read += 1
                report.warn(str(number), f"invalid JSON ({exc.msg})")
                continue
            if not isinstance(record, dict):
                report.records_read += 1
                report.warn(str(number), "record is not an object")
                continue
            yield str(number), record

    def _csv_records(self) -> Iterator[Tuple[str, Dict[str, Any]]]:
        mapping = read_mapping(self.mapping_path)
        try:
            frame = pd.read_csv(self.path, dtype=str, keep_default_na=False)
        except (OSError, UnicodeDecodeError, pd.errors.ParserError) as exc:
            raise IngestError(f"Cannot read catalog {self.path}: {exc}") from exc
        except pd.errors.EmptyDataError as exc:
            raise IngestError(f"Catalog {self.path} has no header row") from exc
        missing = sorted(set(mapping.values()) - set(frame.columns))
        if missing:
            raise ConfigurationError(f"{self.path}: columns {missing} not in header")

        for offset, row in enumerate(frame.to_dict(orient="records")):
            record: Dict[str, Any] = {
                key: row[column] or None for key, column in mapping.items()
            }
            for key in ("categories", "reviews"):
                if record.get(key):
                    items = [s.strip() for s in record[key].split(LIST_SEPARATOR)]
                    items = [s for s in items if s]
                    record[key] = (
                        [{"text": s} for s in items] if key == "reviews" else items
                    )
            # header is line 1
            yield str(offset + 2), record


def ingest_catalog(
    path: Path,
    catalog_format: CatalogFormat = CatalogFormat.Jsonl,
    mapping_path: Optional[Path] = None,
) -> Catalog:
    return CatalogProvider(path, catalog_format, mapping_path).get()[0]
