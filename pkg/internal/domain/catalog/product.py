import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from math import isfinite
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

from internal.domain.errors import InvalidRecordError, ProductNotFoundError


class FieldKind(Enum):
    Categorical = "categorical"
    Numeric = "numeric"


# Virtual numeric field: a product's [min_age, max_age] range must intersect the
# queried age range.
AGE_COVERAGE_FIELD = "age"

DEFAULT_ATTRIBUTE_SCHEMA: Dict[str, FieldKind] = {
    "brand": FieldKind.Categorical,
    "color": FieldKind.Categorical,
    "material": FieldKind.Categorical,
    "category": FieldKind.Categorical,
    "price": FieldKind.Numeric,
    "rating": FieldKind.Numeric,
    "min_age": FieldKind.Numeric,
    "max_age": FieldKind.Numeric,
    AGE_COVERAGE_FIELD: FieldKind.Numeric,
}

TEXT_FIELDS: Tuple[str, ...] = ("title", "description", "reviews")


def normalize_term(value: Optional[str]) -> Optional[str]:
    """Lowercase and collapse whitespace; blank strings become None."""
    if value is None:
        return None
    normalized = " ".join(str(value).split()).lower()
    return normalized or None


@dataclass(frozen=True)
class Review:
    product_id: str
    text: str
    rating: Optional[float] = None

    def __post_init__(self):
        if self.rating is not None and not 0.0 <= self.rating <= 5.0:
            raise InvalidRecordError(
                f"review rating {self.rating} outside [0, 5] for {self.product_id}"
            )


@dataclass(frozen=True)
class Product:
    id: str
    title: str
    description: str = ""
    brand: Optional[str] = None
    color: Optional[str] = None
    material: Optional[str] = None
    price: Optional[float] = None
    rating: Optional[float] = None
    min_age: Optional[int] = None
    max_age: Optional[int] = None
    categories: Tuple[str, ...] = ()
    reviews: Tuple[Review, ...] = ()

    def __post_init__(self):
        if not self.id:
            raise InvalidRecordError("product id must be non-empty")
        object.__setattr__(self, "brand", normalize_term(self.brand))
        object.__setattr__(self, "color", normalize_term(self.color))
        object.__setattr__(self, "material", normalize_term(self.material))
        categories = (normalize_term(c) for c in self.categories)
        object.__setattr__(self, "categories", tuple(c for c in categories if c))
        object.__setattr__(self, "reviews", tuple(self.reviews))

        if self.price is not None and (not isfinite(self.price) or self.price < 0):
            raise InvalidRecordError(f"invalid price {self.price} for {self.id}")
        if self.rating is not None and not 0.0 <= self.rating <= 5.0:
            raise InvalidRecordError(
                f"rating {self.rating} outside [0, 5] for {self.id}"
            )
        for age in (self.min_age, self.max_age):
            if age is not None and age < 0:
                raise InvalidRecordError(f"negative age {age} for {self.id}")
        if (
            self.min_age is not None
            and self.max_age is not None
            and self.min_age > self.max_age
        ):
            raise InvalidRecordError(
                f"min_age {self.min_age} > max_age {self.max_age} for {self.id}"
            )
        for review in self.reviews:
            if review.product_id != self.id:
                raise InvalidRecordError(
                    f"review for {review.product_id} attached to {self.id}"
                )

    @property
    def review_texts(self) -> List[str]:
        return [r.text for r in self.reviews if r.text]

    def text(self, fields: Sequence[str] = TEXT_FIELDS) -> str:
        parts: List[str] = []
        for name in fields:
            if name == "title":
                parts.append(self.title)
            elif name == "description":
                parts.append(self.description)
            elif name == "reviews":
                parts.extend(self.review_texts)
            else:
                raise ValueError(f"Unknown text field: {name}")
        return " ".join(p for p in parts if p)

    def to_record(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "title": self.title,
            "description": self.description,
            "brand": self.brand,
            "color": self.color,
            "material": self.material,
            "price": self.price,
            "rating": self.rating,
            "min_age": self.min_age,
            "max_age": self.max_age,
            "categories": list(self.categories),
            "reviews": [{"text": r.text, "rating": r.rating} for r in self.reviews],
        }

    @staticmethod
    def from_record(record: Dict[str, Any]) -> "Product":
        if _blank_id(record.get("id")):
            raise InvalidRecordError("record has no id")
        product_id = str(record["id"]).strip()
        reviews = tuple(
            Review(
                product_id=product_id,
                text=str(r.get("text") or ""),
                rating=_optional_float(r.get("rating")),
            )
            for r in record.get("reviews") or []
        )
        return Product(
            id=product_id,
            title=str(record.get("title") or ""),
            description=str(record.get("description") or ""),
            brand=record.get("brand"),
            color=record.get("color"),
            material=record.get("material"),
            price=_optional_float(record.get("price")),
            rating=_optional_float(record.get("rating")),
            min_age=_optional_int(record.get("min_age")),
            max_age=_optional_int(record.get("max_age")),
            categories=_string_list(record.get("categories")),
            reviews=reviews,
        )


def _string_list(value: Any) -> Tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return (value,)
    return tuple(str(v) for v in value)


def _blank_id(value: Any) -> bool:
    return value is None or not str(value).strip()


def _optional_float(value: Any) -> Optional[float]:
    if value is None or value == "":
        return None
    try:
        return float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidRecordError(f"not a number: {value!r}") from exc


def _optional_int(value: Any) -> Optional[int]:
    number = _optional_float(value)
    if number is None:
        return None
    if not number.is_integer():
        raise InvalidRecordError(f"not an integer: {value!r}")
    return int(number)


@dataclass(frozen=True)
class Catalog:
    """The dataset D: products keyed by id plus the filterable attribute schema."""

    products: Dict[str, Product]
    attribute_schema: Dict[str, FieldKind] = field(
        default_factory=lambda: dict(DEFAULT_ATTRIBUTE_SCHEMA)
    )

    def __post_init__(self):
        for key, product in self.products.items():
            if key != product.id:
                raise InvalidRecordError(
                    f"catalog key {key} != product id {product.id}"
                )
        ordered = {pid: self.products[pid] for pid in sorted(self.products)}
        object.__setattr__(self, "products", ordered)

    @staticmethod
    def from_products(
        products: Sequence[Product],
        attribute_schema: Optional[Dict[str, FieldKind]] = None,
    ) -> "Catalog":
        by_id: Dict[str, Product] = {}
        for product in products:
            if product.id in by_id:
                raise InvalidRecordError(f"duplicate product id {product.id}")
            by_id[product.id] = product
        if attribute_schema is None:
            return Catalog(by_id)
        return Catalog(by_id, dict(attribute_schema))

    def __len__(self) -> int:
        return len(self.products)

    def __iter__(self) -> Iterator[Product]:
        return iter(self.products.values())

    def __contains__(self, product_id: object) -> bool:
        return product_id in self.products

    def get(self, product_id: str) -> Product:
        try:
            return self.products[product_id]
        except KeyError:
            raise ProductNotFoundError(product_id) from None

    @property
    def ids(self) -> List[str]:
        return list(self.products)

    def brands(self) -> List[str]:
        return sorted({p.brand for p in self if p.brand})

    def to_record(self) -> Dict[str, Any]:
        return {
            "attribute_schema": {
                name: kind.value for name, kind in sorted(self.attribute_schema.items())
            },
            "products": [p.to_record() for p in self],
        }

    @staticmethod
    def from_record(record: Dict[str, Any]) -> "Catalog":
        schema = {
            name: FieldKind(kind) for name, kind in record["attribute_schema"].items()
        }
        products = [Product.from_record(r) for r in record["products"]]
        return Catalog.from_products(products, schema)

    @cached_property
    def version(self) -> str:
        """Content stamp shared by every artifact derived from this catalog."""
        payload = json.dumps(self.to_record(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]
