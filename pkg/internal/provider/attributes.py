import re
from typing import Any, Dict, Optional, Tuple

from internal.domain.catalog.product import normalize_term
from internal.modeling.decomposer import DEFAULT_COLORS

_SPAN = r"(\d{1,2})\s*(?:-|–|to)\s*(\d{1,2})"

# Tried in order; the first match wins. Each yields (min_age, max_age).
_AGE_PATTERNS = [
    re.compile(rf"\b(?:ages?|aged)\s+{_SPAN}", re.IGNORECASE),
    re.compile(rf"\b{_SPAN}\s*(?:years?|yrs?)\b", re.IGNORECASE),
    re.compile(r"\b(?:ages?|aged)\s+(\d{1,2})\s*(?:\+|and\s+up\b)", re.IGNORECASE),
    re.compile(
        r"\b(\d{1,2})\s*(?:\+\s*(?:years?|yrs?)\b"
        r"|(?:years?|yrs?)(?:\s+old)?\s+and\s+(?:up|older)\b)",
        re.IGNORECASE,
    ),
]

_WORD = r"[A-Z][\w'.-]*"
_BRAND = re.compile(rf"\b[Bb]y\s+({_WORD}(?:\s+(?:&\s+)?{_WORD})*)")
_BRAND_STOP = {"ages", "age", "aged", "for", "with", "and"}

_COLOR = re.compile(
    r"\b(" + "|".join(re.escape(c) for c in DEFAULT_COLORS) + r")\b", re.IGNORECASE
)


def _age_range(text: str) -> Tuple[Optional[int], Optional[int]]:
    for pattern in _AGE_PATTERNS:
        m = pattern.search(text)
        if m is None:
            continue
        values = [int(g) for g in m.groups() if g is not None]
        if len(values) == 1:
            return values[0], None
        low, high = values
        if low > high:
            return None, None
        return low, high
    return None, None


def _brand(text: str) -> Optional[str]:
    m = _BRAND.search(text)
    if m is None:
        return None
    words = m.group(1).split()
    while words and words[-1].lower() in _BRAND_STOP:
        words.pop()
    while words and words[-1] == "&":
        words.pop()
    kept = []
    for word in words:
        if word.lower() in _BRAND_STOP:
            break
        kept.append(word)
    return normalize_term(" ".join(kept).rstrip(".,"))


def _color(text: str) -> Optional[str]:
    found = {m.group(1).lower() for m in _COLOR.finditer(text)}
    return found.pop() if len(found) == 1 else None


def extract_attributes(description: str, title: str = "") -> Dict[str, Any]:
    """Brand, age range and color found by fixed patterns; absent when unsure.

    >>> extract_attributes("Building kit by LEGO, Ages 5-8")
    {'brand': 'lego', 'min_age': 5, 'max_age': 8}
    """
    text = " ".join(t for t in (title, description) if t)
    found: Dict[str, Any] = {}
    brand = _brand(text)
    if brand:
        found["brand"] = brand
    min_age, max_age = _age_range(text)
    if min_age is not None:
        found["min_age"] = min_age
    if max_age is not None:
        found["max_age"] = max_age
    color = _color(text)
    if color:
        found["color"] = color
    return found
