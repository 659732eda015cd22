from pathlib import Path

import pytest

from internal.domain.catalog.product import Catalog, Product
from internal.provider.catalog import ingest_catalog
from internal.retrieval.pipeline import SearchEngine

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
SAMPLE_CATALOG = DATA_DIR / "sample_catalog.jsonl"

WORKED_QUERY = "A long black dress from Zara under $100"


def make_product(product_id: str = "p1", title: str = "", **fields) -> Product:
    return Product(id=product_id, title=title, **fields)


def make_catalog(*products: Product) -> Catalog:
    return Catalog.from_products(list(products))


@pytest.fixture(scope="session")
def sample_catalog() -> Catalog:
    return ingest_catalog(SAMPLE_CATALOG)


@pytest.fixture(scope="session")
def sample_engine(sample_catalog) -> SearchEngine:
    return SearchEngine.build(sample_catalog)


@pytest.fixture
def toy_cars() -> Catalog:
    return make_catalog(
        make_product("d1", "red toy car"),
        make_product("d2", "blue toy"),
        make_product("d3", "red car"),
    )
