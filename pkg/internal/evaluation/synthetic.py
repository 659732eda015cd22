"""Seeded toy-store corpus with templated queries and exhaustive ground truth."""

import logging
import math
from dataclasses import dataclass
from typing import Callable, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from internal.domain.catalog.product import AGE_COVERAGE_FIELD, Catalog, Product, Review
from internal.domain.evaluation.judgment import EvalQuery
from internal.domain.query.decomposition import Constraint, DecomposedQuery
from internal.evaluation.judge import DeterministicJudge
from internal.modeling.tokenizer import Tokenizer
from internal.retrieval.filtering import FilterPolicy

logger = logging.getLogger(__name__)

BRANDS = ("Zubo", "Kindera", "Playwell", "Brightbay", "Tinkerton", "Marlo", "Quillo")
COLORS = ("red", "blue", "green", "yellow", "pink", "purple", "orange", "black")
ADJECTIVES = ("classic", "deluxe", "mini", "compact", "sturdy", "foldable", "premium")
# type -> base price
TYPES = {
    "puzzle": 15.0,
    "kite": 20.0,
    "doll": 25.0,
    "robot": 60.0,
    "kaleidoscope": 12.0,
    "train": 45.0,
    "drone": 80.0,
    "scooter": 70.0,
    "telescope": 90.0,
    "xylophone": 30.0,
}
REVIEWS = (
    "Great quality and fun to play with.",
    "My kid loves it.",
    "Arrived quickly, well made.",
    "Good value for the price.",
    "Sturdy and fun.",
    "Held up well after weeks of play.",
)
# Every filler word is a stopword, so the residual's content is the product type.
OPENERS = ("a {kind}", "looking for a {kind}", "i want a {kind}", "find me a {kind}")

MAX_ATTEMPTS = 50
TOP_RATED = 4.0

Segment = Tuple[str, Optional[Constraint]]


@dataclass(frozen=True)
class SyntheticCorpus:
    catalog: Catalog
    queries: List[EvalQuery]


def _product(rng: np.random.Generator, index: int) -> Product:
    kind = str(rng.choice(list(TYPES)))
    brand = str(rng.choice(BRANDS))
    color = str(rng.choice(COLORS))
    adjective = str(rng.choice(ADJECTIVES))
    price = round(TYPES[kind] * float(rng.uniform(0.5, 2.0)), 2)
    min_age = int(rng.choice([3, 4, 5, 6, 8]))
    max_age = min_age + int(rng.integers(3, 7))
    product_id = f"p{index:04d}"
    reviews = tuple(
        Review(product_id, str(rng.choice(REVIEWS)), float(rng.integers(1, 6)))
        for _ in range(int(rng.integers(0, 3)))
    )
    return Product(
        id=product_id,
        title=f"{brand} {color.title()} {adjective.title()} {kind.title()}",
        description=f"A {adjective} {kind} by {brand}, Ages {min_age}-{max_age}.",
        brand=brand,
        color=color,
        price=price,
        rating=round(float(rng.uniform(2.5, 5.0)), 1),
        min_age=min_age,
        max_age=max_age,
        categories=("toys", kind),
        reviews=reviews,
    )


def _kind_of(p: Product) -> str:
    return p.categories[-1]


def _brand_segments(rng: np.random.Generator, p: Product) -> List[Segment]:
    brand = next(b for b in BRANDS if b.lower() == p.brand)
    lead = str(rng.choice(["from", "by", "made by"]))
    return [(f"{lead} {brand}", Constraint.equals("brand", p.brand))]


def _color_segments(rng: np.random.Generator, p: Product) -> List[Segment]:
    return [("in", None), (p.color, Constraint.equals("color", p.color))]


def _price_segments(rng: np.random.Generator, p: Product) -> List[Segment]:
    match int(rng.integers(0, 4)):
        case 0:
            cap = int(math.ceil(p.price / 5.0) * 5)
            return [(f"under ${cap}", Constraint.at_most("price", cap))]
        case 1:
            floor = int(math.floor(p.price / 5.0) * 5)
            return [(f"over ${floor}", Constraint.at_least("price", floor))]
        case 2:
            center = int(round(p.price))
            return [(f"priced around ${center}", Constraint.around("price", center))]
        case _:
            low = int(math.floor(p.price * 0.8 / 5.0) * 5)
            high = int(math.ceil(p.price * 1.2 / 5.0) * 5)
            return [
                (
                    f"between ${low} and ${high}",
                    Constraint.between("price", low, high),
                )
            ]


def _age_segments(rng: np.random.Generator, p: Product) -> List[Segment]:
    low, high = p.min_age, p.max_age
    match int(rng.integers(0, 3)):
        case 0:
            text = f"for kids aged {low}-{high}"
            return [(text, Constraint.between(AGE_COVERAGE_FIELD, low, high))]
        case 1:
            age = int(rng.integers(low, high + 1))
            text = f"for my {age}-year-old"
            return [(text, Constraint.between(AGE_COVERAGE_FIELD, age, age))]
        case _:
            return [(f"for ages {low}+", Constraint.at_least(AGE_COVERAGE_FIELD, low))]


def _rating_segments(rng: np.random.Generator, p: Product) -> List[Segment]:
    if rng.integers(0, 2) == 0:
        top = Constraint.at_least("rating", TOP_RATED)
        return [("that is", None), ("top-rated", top)]
    stars = int(math.floor(p.rating))
    return [("with", None), (f"{stars}+ stars", Constraint.at_least("rating", stars))]


# Generation order is also textual order.
SEGMENT_BUILDERS: Sequence[
    Tuple[str, Callable[[np.random.Generator, Product], List[Segment]]]
] = (
    ("brand", _brand_segments),
    ("color", _color_segments),
    ("price", _price_segments),
    ("age", _age_segments),
    ("rating", _rating_segments),
)


def _query(
    rng: np.random.Generator, anchor: Product, tokenizer: Tokenizer
) -> DecomposedQuery:
    opener = str(rng.choice(OPENERS)).format(kind=_kind_of(anchor))
    segments: List[Segment] = [(opener, None)]
    count = int(rng.integers(1, 4))
    picked = sorted(rng.choice(len(SEGMENT_BUILDERS), size=count, replace=False))
    for i in picked:
        name, build = SEGMENT_BUILDERS[int(i)]
        if name == "rating" and anchor.rating < TOP_RATED * 0.8:
            continue
        segments.extend(build(rng, anchor))

    raw = " ".join(text for text, _ in segments)
    residual = [
        token
        for text, constraint in segments
        if constraint is None
        for token in tokenizer.tokenize(text)
    ]
    return DecomposedQuery(
        raw=raw,
        constraints=tuple(c for _, c in segments if c is not None),
        semantic_residual=" ".join(residual),
    )


def ground_truth(
    catalog: Catalog, d: DecomposedQuery, judge: DeterministicJudge
) -> FrozenSet[str]:
    """Relevant ids by judging every product."""
    return frozenset(p.id for p in catalog if judge.judge(d.raw, d, p))


def generate_synthetic_corpus(
    seed: int,
    n_products: int,
    n_queries: int,
    min_relevant: int = 1,
    policy: Optional[FilterPolicy] = None,
) -> SyntheticCorpus:
    """Deterministic per seed. Each query is anchored on a product that satisfies
    it, so ground truth is never empty; queries with fewer than `min_relevant`
    relevant products are redrawn up to MAX_ATTEMPTS times."""
    if n_products < 1 or n_queries < 1:
        raise ValueError("corpus sizes must be >= 1")
    rng = np.random.default_rng(seed)
    tokenizer = Tokenizer()
    judge = DeterministicJudge(policy or FilterPolicy(), tokenizer=tokenizer)
    catalog = Catalog.from_products([_product(rng, i) for i in range(n_products)])
    products = list(catalog)

    queries: List[EvalQuery] = []
    for j in range(n_queries):
        best: Optional[Tuple[DecomposedQuery, FrozenSet[str]]] = None
        for _ in range(MAX_ATTEMPTS):
            anchor = products[int(rng.integers(0, len(products)))]
            d = _query(rng, anchor, tokenizer)
            relevant = ground_truth(catalog, d, judge)
            if best is None or len(relevant) > len(best[1]):
                best = (d, relevant)
            if len(relevant) >= min_relevant:
                break
        d, relevant = best
        if len(relevant) < min_relevant:
            logger.debug("q%03d keeps %d relevant products", j, len(relevant))
        queries.append(
            EvalQuery(
                query_id=f"q{j:03d}", text=d.raw, intended=d, relevant_ids=relevant
            )
        )
    logger.info(
        "Generated %d products and %d queries (seed %d)",
        len(catalog),
        len(queries),
        seed,
    )
    return SyntheticCorpus(catalog=catalog, queries=queries)
