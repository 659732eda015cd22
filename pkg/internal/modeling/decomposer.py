import logging
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass
from math import isfinite
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from pydantic import ValidationError

from internal.domain.catalog.product import (
    AGE_COVERAGE_FIELD,
    DEFAULT_ATTRIBUTE_SCHEMA,
    Catalog,
    FieldKind,
    normalize_term,
)
from internal.domain.errors import EmptyQueryError, QamError
from internal.domain.query.decomposition import (
    Constraint,
    ConstraintKind,
    DecomposedQuery,
)
from internal.infra.api.model_services import ModelServiceClient
from internal.modeling.tokenizer import Tokenizer

logger = logging.getLogger(__name__)

DEFAULT_TOP_RATED_THRESHOLD = 4.0

DEFAULT_COLORS: Tuple[str, ...] = (
    "black", "white", "red", "blue", "green", "yellow", "pink", "purple",
    "orange", "brown", "gray", "grey", "silver", "gold", "beige", "navy",
    "turquoise", "multicolor",
)  # fmt: skip

DEFAULT_MATERIALS: Dict[str, str] = {
    "wood": "wood",
    "wooden": "wood",
    "plastic": "plastic",
    "metal": "metal",
    "cotton": "cotton",
    "silk": "silk",
    "leather": "leather",
    "wool": "wool",
    "bamboo": "bamboo",
}

_MONEY = r"\$\s?(\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?)"
_MONEY_OPT = r"\$?\s?(\d{1,3}(?:,\d{3})+(?:\.\d+)?|\d+(?:\.\d+)?)"
_PRICE_LEAD = r"(?:(?:priced|costing|that\s+costs?|for)\s+)?"
_AGE = r"(\d{1,2})"
_YEARS = r"(?:years?|yrs?)"
_KIDS = r"(?:(?:kids|children|child|toddlers|boys|girls|teens)\s+)?"
_AND_UP = r"(?:and\s+(?:up|older|over)|or\s+older)"
_BRAND_LEAD = r"(?:(?:from|by|made\s+by)\s+)?"


def _bounded(body: str) -> re.Pattern:
    return re.compile(rf"(?<![\w$])(?:{body})(?!\w)", re.IGNORECASE)


def _numbers(m: re.Match) -> List[float]:
    return [float(g.replace(",", "")) for g in m.groups() if g is not None]


def _price_between(m: re.Match) -> Constraint:
    low, high = sorted(_numbers(m)[:2])
    return Constraint.between("price", low, high)


def _age_between(m: re.Match) -> Constraint:
    values = _numbers(m)
    low, high = sorted(values[:2]) if len(values) > 1 else (values[0], values[0])
    return Constraint.between(AGE_COVERAGE_FIELD, low, high)


Builder = Callable[[re.Match], Optional[Constraint]]

PRICE_RULES: List[Tuple[re.Pattern, Builder]] = [
    (
        _bounded(
            rf"{_PRICE_LEAD}(?:between\s+{_MONEY}\s+(?:and|to)\s+{_MONEY_OPT}"
            rf"|from\s+{_MONEY}\s+to\s+{_MONEY_OPT}"
            rf"|{_MONEY}\s*(?:-|–|to)\s*{_MONEY_OPT})"
        ),
        _price_between,
    ),
    (
        _bounded(
            rf"{_PRICE_LEAD}(?:under|below|less\s+than|at\s+most|no\s+more\s+than"
            r"|up\s+to|cheaper\s+than|max(?:imum)?(?:\s+of)?"
            r"|(?:within|on|with)\s+(?:a|my|the|our)\s+budget\s+of|budget\s+of)"
            rf"\s+{_MONEY}"
        ),
        lambda m: Constraint.at_most("price", _numbers(m)[0]),
    ),
    (
        _bounded(
            rf"{_PRICE_LEAD}(?:over|above|more\s+than|at\s+least|no\s+less\s+than)"
            rf"\s+{_MONEY}"
        ),
        lambda m: Constraint.at_least("price", _numbers(m)[0]),
    ),
    (
        _bounded(
            rf"{_PRICE_LEAD}(?:around|about|approximately|roughly|close\s+to|near|~)"
            rf"\s*{_MONEY}|priced\s+at\s+{_MONEY}"
        ),
        lambda m: Constraint.around("price", _numbers(m)[0]),
    ),
]

AGE_RULES: List[Tuple[re.Pattern, Builder]] = [
    (
        _bounded(
            rf"(?:for\s+)?{_KIDS}(?:aged|ages?)\s+{_AGE}\s*(?:-|–|to)\s*{_AGE}"
            rf"(?:\s*{_YEARS}(?:\s+old)?)?"
        ),
        _age_between,
    ),
    (
        _bounded(
            rf"(?:for\s+)?{_KIDS}{_AGE}\s*(?:-|–|to)\s*{_AGE}\s*{_YEARS}"
            r"(?:[\s-]+olds?)?"
        ),
        _age_between,
    ),
    (
        _bounded(rf"(?:for\s+)?{_KIDS}(?:aged|ages?)\s+{_AGE}\s*(?:\+|{_AND_UP})"),
        lambda m: Constraint.at_least(AGE_COVERAGE_FIELD, _numbers(m)[0]),
    ),
    (
        _bounded(
            rf"(?:for\s+)?(?:{_AGE}\s*\+\s*{_YEARS}(?:\s+old)?"
            rf"|{_AGE}\s*{_YEARS}(?:\s+old)?\s+{_AND_UP})"
        ),
        lambda m: Constraint.at_least(AGE_COVERAGE_FIELD, _numbers(m)[0]),
    ),
    (
        _bounded(
            r"(?:for\s+)?(?:my|a|an|our|her|his|their)\s+"
            rf"{_AGE}[\s-]*{_YEARS}[\s-]*olds?"
        ),
        _age_between,
    ),
    (
        _bounded(rf"(?:for\s+)?(?:kids|children|a\s+child|toddlers)\s+aged\s+{_AGE}"),
        _age_between,
    ),
]


def _rating_rules(threshold: float) -> List[Tuple[re.Pattern, Builder]]:
    return [
        (
            _bounded(
                r"(?:rated\s+)?(?:at\s+least\s+)?([0-5](?:\.\d)?)\s*(?:\+\s*)?stars?"
                r"(?:\s+(?:or\s+(?:more|higher|better|above)|and\s+(?:up|above)))?"
            ),
            lambda m: Constraint.at_least("rating", _numbers(m)[0]),
        ),
        (
            _bounded(r"(?:top|highly|best|well)[\s-]+rated"),
            lambda m: Constraint.at_least("rating", threshold),
        ),
    ]


def _lexicon_rule(
    field: str, lexicon: Mapping[str, str], lead: str = ""
) -> List[Tuple[re.Pattern, Builder]]:
    if not lexicon:
        return []
    terms = sorted(lexicon, key=lambda t: (-len(t), t))
    alternatives = "|".join(re.escape(t).replace(r"\ ", r"\s+") for t in terms)
    regex = _bounded(rf"{lead}({alternatives})")

    def build(m: re.Match) -> Optional[Constraint]:
        value = lexicon.get(normalize_term(m.group(1)) or "")
        return None if value is None else Constraint.equals(field, value)

    return [(regex, build)]


@dataclass(frozen=True)
class RuleMatch:
    start: int
    end: int
    constraint: Constraint

    @property
    def span(self) -> Tuple[int, int]:
        return self.start, self.end


class Decomposer(ABC):
    """Splits a raw query into metadata constraints and a semantic residual."""

    @property
    @abstractmethod
    def decomposer_id(self) -> str: ...

    @abstractmethod
    def decompose(self, raw: str) -> DecomposedQuery: ...

    def decompose_traced(self, raw: str) -> Tuple[DecomposedQuery, bool]:
        """The decomposition and whether a fallback produced it."""
        return self.decompose(raw), False


class RuleBasedDecomposer(Decomposer):
    """Deterministic regex grammar over price, age, rating and lexicon fields.

    Each rule group (price, age, rating, brand, color, material) yields at most
    one constraint; a match may not overlap text already consumed by an
    earlier group. The residual keeps every token outside consumed spans.
    """

    def __init__(
        self,
        brands: Iterable[str] = (),
        schema: Optional[Mapping[str, FieldKind]] = None,
        colors: Sequence[str] = DEFAULT_COLORS,
        materials: Optional[Mapping[str, str]] = None,
        top_rated_threshold: float = DEFAULT_TOP_RATED_THRESHOLD,
        tokenizer: Optional[Tokenizer] = None,
    ):
        self._schema = dict(schema or DEFAULT_ATTRIBUTE_SCHEMA)
        self._tokenizer = tokenizer or Tokenizer()
        brand_lexicon = {b: b for b in (normalize_term(x) for x in brands) if b}
        color_lexicon = {c: c for c in (normalize_term(x) for x in colors) if c}
        material_lexicon = dict(
            materials if materials is not None else DEFAULT_MATERIALS
        )
        self._groups: List[List[Tuple[re.Pattern, Builder]]] = [
            PRICE_RULES,
            AGE_RULES,
            _rating_rules(top_rated_threshold),
            _lexicon_rule("brand", brand_lexicon, lead=_BRAND_LEAD),
            _lexicon_rule("color", color_lexicon),
            _lexicon_rule("material", material_lexicon),
        ]

    @classmethod
    def make(
        cls,
        catalog: Catalog,
        top_rated_threshold: float = DEFAULT_TOP_RATED_THRESHOLD,
        tokenizer: Optional[Tokenizer] = None,
    ) -> "RuleBasedDecomposer":
        return cls(
            brands=catalog.brands(),
            schema=catalog.attribute_schema,
            top_rated_threshold=top_rated_threshold,
            tokenizer=tokenizer,
        )

    @property
    def decomposer_id(self) -> str:
        return "rule-based"

    @property
    def schema(self) -> Dict[str, FieldKind]:
        return dict(self._schema)

    def matches(self, raw: str) -> List[RuleMatch]:
        taken: List[RuleMatch] = []
        for rules in self._groups:
            for regex, build in rules:
                found = self._first_free_match(regex, build, raw, taken)
                if found is not None:
                    taken.append(found)
                    break
        return sorted(taken, key=lambda m: m.start)

    def _first_free_match(
        self,
        regex: re.Pattern,
        build: Builder,
        raw: str,
        taken: List[RuleMatch],
    ) -> Optional[RuleMatch]:
        for m in regex.finditer(raw):
            if any(m.start() < t.end and t.start < m.end() for t in taken):
                continue
            constraint = build(m)
            if constraint is None or constraint.field not in self._schema:
                continue
            return RuleMatch(m.start(), m.end(), constraint)
        return None

    def decompose(self, raw: str) -> DecomposedQuery:
        if not raw or not raw.strip():
            raise EmptyQueryError("query is empty")
        found = self.matches(raw)
        residual = [
            token
            for token, start, end in self._tokenizer.spans(raw)
            if not any(start < m.end and m.start < end for m in found)
        ]
        return DecomposedQuery(
            raw=raw,
            constraints=tuple(m.constraint for m in found),
            semantic_residual=" ".join(residual),
        )


class RemoteDecomposer(Decomposer):
    """External decomposer (e.g. an LLM service) returning the wire shape."""

    def __init__(self, client: ModelServiceClient):
        self._client = client

    @property
    def decomposer_id(self) -> str:
        return f"remote-{self._client.base_url}"

    def decompose(self, raw: str) -> DecomposedQuery:
        if not raw or not raw.strip():
            raise EmptyQueryError("query is empty")
        return DecomposedQuery.from_wire(self._client.decompose(raw))


class FallbackDecomposer(Decomposer):
    """Validates the primary decomposer's output and falls back to rules."""

    def __init__(
        self,
        primary: Decomposer,
        fallback: RuleBasedDecomposer,
        tokenizer: Optional[Tokenizer] = None,
    ):
        self._primary = primary
        self._fallback = fallback
        self._tokenizer = tokenizer or Tokenizer()

    @property
    def decomposer_id(self) -> str:
        return f"{self._primary.decomposer_id}+{self._fallback.decomposer_id}"

    def decompose(self, raw: str) -> DecomposedQuery:
        return self.decompose_traced(raw)[0]

    def decompose_traced(self, raw: str) -> Tuple[DecomposedQuery, bool]:
        if not raw or not raw.strip():
            raise EmptyQueryError("query is empty")
        try:
            candidate = self._primary.decompose(raw)
        except (QamError, ValidationError, ValueError) as exc:
            logger.warning(
                "%s failed (%s); using %s",
                self._primary.decomposer_id,
                exc,
                self._fallback.decomposer_id,
            )
            return self._fallback.decompose(raw), True

        violations = validate_decomposition(
            candidate, self._fallback.schema, self._tokenizer
        )
        if candidate.raw != raw:
            violations.append("decomposition is for a different query")
        if violations:
            logger.warning(
                "%s output rejected: %s",
                self._primary.decomposer_id,
                "; ".join(violations),
            )
            return self._fallback.decompose(raw), True
        return candidate, False


def _is_subsequence(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    remaining = iter(haystack)
    return all(token in remaining for token in needle)


def validate_decomposition(
    d: DecomposedQuery,
    schema: Mapping[str, FieldKind],
    tokenizer: Optional[Tokenizer] = None,
) -> List[str]:
    """Every invariant violation of `d`; an empty list means ok."""
    tokenizer = tokenizer or Tokenizer()
    violations: List[str] = []
    if not d.raw.strip():
        violations.append("empty query")

    for c in d.constraints:
        where = f"constraint {c.field}/{c.kind.value}"
        kind = schema.get(c.field)
        if kind is None:
            violations.append(f"unknown field {c.field!r}")
            continue
        bounds = [b for b in (c.numeric_low, c.numeric_high) if b is not None]
        if any(not isfinite(b) for b in bounds):
            violations.append(f"{where}: non-finite bound")
            continue

        if c.kind is ConstraintKind.Equals:
            if kind is not FieldKind.Categorical:
                violations.append(f"{where}: equals on numeric field")
            if not normalize_term(c.categorical_value):
                violations.append(f"{where}: missing categorical value")
            if bounds:
                violations.append(f"{where}: equals takes no numeric bound")
            continue

        if kind is not FieldKind.Numeric:
            violations.append(f"{where}: numeric comparison on categorical field")
        if c.categorical_value is not None:
            violations.append(f"{where}: numeric constraint with categorical value")
        match c.kind:
            case ConstraintKind.AtMost | ConstraintKind.AtLeast:
                if len(bounds) != 1:
                    violations.append(f"{where}: expects exactly one numeric bound")
            case ConstraintKind.Around:
                if c.numeric_low is None or c.numeric_high is not None:
                    violations.append(f"{where}: expects a single center value")
            case ConstraintKind.Between:
                if len(bounds) != 2:
                    violations.append(f"{where}: expects low and high bounds")
                elif c.numeric_low > c.numeric_high:
                    violations.append(
                        f"{where}: inverted range "
                        f"{c.numeric_low:g} > {c.numeric_high:g}"
                    )

    residual = tokenizer.tokenize(d.semantic_residual)
    if not _is_subsequence(residual, tokenizer.tokenize(d.raw)):
        violations.append("semantic residual is not a subsequence of the query")
    return violations


def make_decomposer(
    kind: str,
    catalog: Catalog,
    top_rated_threshold: float = DEFAULT_TOP_RATED_THRESHOLD,
    tokenizer: Optional[Tokenizer] = None,
    url: Optional[str] = None,
    api_key: Optional[str] = None,
    timeout: float = 120.0,
) -> Decomposer:
    rules = RuleBasedDecomposer.make(catalog, top_rated_threshold, tokenizer)
    match kind:
        case "rule":
            return rules
        case "remote":
            if not url:
                raise ValueError("remote decomposer requires a url")
            client = ModelServiceClient.make(url, api_key, timeout)
            remote = RemoteDecomposer(client)
            return FallbackDecomposer(remote, rules, tokenizer)
        case _:
            raise ValueError(f"Unsupported decomposer: {kind}")
