import numpy as np
import pytest

from internal.domain.query.decomposition import Constraint, ConstraintKind
from internal.retrieval.filtering import (
    FilterPolicy,
    MissingFieldBehavior,
    explain_product,
    filter_catalog,
    satisfies,
)
from tests.conftest import make_catalog, make_product

BRANDS = ["lego", "zubo", "marlo", None]
COLORS = ["red", "blue", None]


@pytest.fixture
def policy() -> FilterPolicy:
    return FilterPolicy()


def random_catalog(rng, size):
    products = []
    for i in range(size):
        low = int(rng.integers(0, 10))
        products.append(
            make_product(
                f"p{i:02d}",
                "toy",
                brand=BRANDS[int(rng.integers(0, len(BRANDS)))],
                color=COLORS[int(rng.integers(0, len(COLORS)))],
                price=None if rng.random() < 0.1 else float(rng.integers(5, 200)) + 0.5,
                rating=float(rng.integers(1, 6)),
                min_age=low,
                max_age=low + int(rng.integers(0, 6)),
            )
        )
    return make_catalog(*products)


def random_constraints(rng):
    pool = [
        Constraint.equals("brand", "lego"),
        Constraint.equals("color", "red"),
        Constraint.at_most("price", float(rng.integers(10, 150))),
        Constraint.at_least("price", float(rng.integers(10, 150))),
        Constraint.around("price", float(rng.integers(10, 150))),
        Constraint.between("price", 20, 90),
        Constraint.at_least("rating", 4),
        Constraint.between("age", 3, 5),
    ]
    picked = rng.choice(len(pool), size=int(rng.integers(0, 4)), replace=False)
    return [pool[int(i)] for i in picked]


def reference_accepts(p, c):
    """Default-policy acceptance worked out directly per constraint kind."""
    if c.field == "age":
        return p.min_age <= c.numeric_high and p.max_age >= c.numeric_low
    value = getattr(p, c.field)
    if value is None:
        return False
    if c.kind is ConstraintKind.Equals:
        return value.lower() == c.categorical_value.lower()
    if c.kind is ConstraintKind.AtMost:
        return value <= c.bound * 1.2
    if c.kind is ConstraintKind.AtLeast:
        return value >= c.bound * 0.8
    if c.kind is ConstraintKind.Around:
        return abs(value - c.bound) <= 0.2 * c.bound
    return c.numeric_low * 0.8 <= value <= c.numeric_high * 1.2


class TestSatisfies:
    def test_price_cap_has_slack(self, policy):
        cap = Constraint.at_most("price", 100)
        assert satisfies(make_product(price=110.0), cap, policy)
        assert not satisfies(make_product(price=121.0), cap, policy)

    def test_price_floor_has_slack(self, policy):
        floor = Constraint.at_least("price", 50)
        assert satisfies(make_product(price=40.0), floor, policy)
        assert not satisfies(make_product(price=39.0), floor, policy)

    def test_around(self, policy):
        around = Constraint.around("price", 12)
        assert satisfies(make_product(price=12.5), around, policy)
        assert not satisfies(make_product(price=15.0), around, policy)

    def test_between(self, policy):
        between = Constraint.between("price", 20, 50)
        assert satisfies(make_product(price=16.0), between, policy)
        assert satisfies(make_product(price=60.0), between, policy)
        assert not satisfies(make_product(price=61.0), between, policy)

    def test_brand_equals(self, policy):
        p = make_product(brand="Zara")
        assert satisfies(p, Constraint.equals("brand", "zara"), policy)
        assert not satisfies(p, Constraint.equals("brand", "mango"), policy)

    def test_category(self, policy):
        p = make_product(categories=("Toys", "Kites"))
        assert satisfies(p, Constraint.equals("category", "kites"), policy)

    def test_age_coverage(self, policy):
        three = Constraint.between("age", 3, 3)
        assert satisfies(make_product(min_age=3, max_age=6), three, policy)
        assert satisfies(make_product(min_age=1, max_age=3), three, policy)
        assert not satisfies(make_product(min_age=4, max_age=8), three, policy)
        assert satisfies(make_product(min_age=6), Constraint.at_least("age", 6), policy)

    def test_missing_field(self, policy):
        cap = Constraint.at_most("price", 100)
        assert not satisfies(make_product(), cap, policy)
        include = FilterPolicy(missing_field_behavior=MissingFieldBehavior.Include)
        assert satisfies(make_product(), cap, include)

    def test_slack_bounds(self):
        with pytest.raises(ValueError):
            FilterPolicy(numeric_slack=1.0)
        with pytest.raises(ValueError):
            FilterPolicy(around_slack=-0.1)


class TestFilterCatalog:
    def test_no_constraints_keeps_everything(self, sample_catalog, policy):
        assert filter_catalog(sample_catalog, [], policy) == set(sample_catalog.ids)

    def test_brand(self, sample_catalog, policy):
        lego = filter_catalog(
            sample_catalog, [Constraint.equals("brand", "lego")], policy
        )
        assert lego == {"t004", "t005"}

    def test_matches_brute_force(self, policy):
        rng = np.random.default_rng(17)
        for _ in range(200):
            catalog = random_catalog(rng, int(rng.integers(1, 30)))
            constraints = random_constraints(rng)
            expected = {
                p.id
                for p in catalog
                if all(reference_accepts(p, c) for c in constraints)
            }
            assert filter_catalog(catalog, constraints, policy) == expected

    def test_adding_a_constraint_never_grows_the_result(self, policy):
        rng = np.random.default_rng(23)
        for _ in range(30):
            catalog = random_catalog(rng, 25)
            constraints = random_constraints(rng)
            extra = random_constraints(rng)[:1]
            base = filter_catalog(catalog, constraints, policy)
            narrowed = filter_catalog(catalog, constraints + extra, policy)
            assert narrowed <= base <= set(catalog.ids)

    def test_explain_product(self, sample_catalog, policy):
        constraints = [
            Constraint.equals("brand", "zara"),
            Constraint.at_most("price", 100),
        ]
        checks = explain_product(sample_catalog.get("d002"), constraints, policy)
        assert [passed for _, passed in checks] == [True, False]
