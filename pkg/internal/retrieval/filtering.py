from dataclasses import dataclass
from enum import Enum
from math import inf
from typing import FrozenSet, List, Optional, Sequence, Tuple

from internal.domain.catalog.product import (
    AGE_COVERAGE_FIELD,
    Catalog,
    Product,
    normalize_term,
)
from internal.domain.query.decomposition import Constraint, ConstraintKind

AGE_FIELDS = frozenset({AGE_COVERAGE_FIELD, "min_age", "max_age"})


class MissingFieldBehavior(Enum):
    Exclude = "exclude"
    Include = "include"


@dataclass(frozen=True)
class FilterPolicy:
    """Tolerances shared by the metadata filter and the deterministic judge.

    numeric_slack widens at_most / at_least / between on price and rating;
    around_slack sets the width of `around`; age_slack applies to age fields.
    """

    numeric_slack: float = 0.20
    around_slack: float = 0.20
    age_slack: float = 0.0
    missing_field_behavior: MissingFieldBehavior = MissingFieldBehavior.Exclude

    def __post_init__(self):
        for name in ("numeric_slack", "around_slack", "age_slack"):
            value = getattr(self, name)
            if not 0.0 <= value < 1.0:
                raise ValueError(f"{name} must be in [0, 1), got {value}")

    def slack_for(self, field: str) -> float:
        return self.age_slack if field in AGE_FIELDS else self.numeric_slack


def _accepted_range(c: Constraint, policy: FilterPolicy) -> Tuple[float, float]:
    slack = policy.slack_for(c.field)
    match c.kind:
        case ConstraintKind.AtMost:
            return -inf, c.bound * (1.0 + slack)
        case ConstraintKind.AtLeast:
            return c.bound * (1.0 - slack), inf
        case ConstraintKind.Between:
            return c.numeric_low * (1.0 - slack), c.numeric_high * (1.0 + slack)
        case ConstraintKind.Around:
            width = policy.around_slack
            return c.bound * (1.0 - width), c.bound * (1.0 + width)
        case _:
            raise ValueError(f"{c.kind} is not a numeric constraint")


def _age_coverage(p: Product, c: Constraint, policy: FilterPolicy) -> Optional[bool]:
    if p.min_age is None and p.max_age is None:
        return None
    low, high = _accepted_range(c, policy)
    product_low = p.min_age if p.min_age is not None else 0
    product_high = p.max_age if p.max_age is not None else inf
    return product_low <= high and low <= product_high


def _categorical(p: Product, c: Constraint) -> Optional[bool]:
    wanted = normalize_term(c.categorical_value)
    if c.field == "category":
        if not p.categories:
            return None
        return wanted in p.categories
    value = getattr(p, c.field, None)
    if value is None:
        return None
    return normalize_term(str(value)) == wanted


def _numeric(p: Product, c: Constraint, policy: FilterPolicy) -> Optional[bool]:
    value = getattr(p, c.field, None)
    if value is None:
        return None
    low, high = _accepted_range(c, policy)
    return low <= value <= high


def satisfies(p: Product, c: Constraint, policy: FilterPolicy) -> bool:
    if c.kind is ConstraintKind.Equals:
        outcome = _categorical(p, c)
    elif c.field == AGE_COVERAGE_FIELD:
        outcome = _age_coverage(p, c, policy)
    else:
        outcome = _numeric(p, c, policy)

    if outcome is None:
        return policy.missing_field_behavior is MissingFieldBehavior.Include
    return outcome


def filter_catalog(
    catalog: Catalog, constraints: Sequence[Constraint], policy: FilterPolicy
) -> FrozenSet[str]:
    """D_filtered: ids of products satisfying every constraint."""
    return frozenset(
        p.id for p in catalog if all(satisfies(p, c, policy) for c in constraints)
    )


def explain_product(
    p: Product, constraints: Sequence[Constraint], policy: FilterPolicy
) -> List[Tuple[Constraint, bool]]:
    return [(c, satisfies(p, c, policy)) for c in constraints]
