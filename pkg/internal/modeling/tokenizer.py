import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, FrozenSet, Iterator, List, Tuple

DEFAULT_TOKEN_PATTERN = r"[^\W_]+"

STOPWORDS: FrozenSet[str] = frozenset(
    """
    a an and are as at be but by for from has have i in is it its me my of on
    or our so that the their them this to was we were with you your looking
    find want need some any can
    """.split()
)


@dataclass(frozen=True)
class Tokenizer:
    """Lowercasing regex tokenizer; no stemming unless `stem` is set."""

    lowercase: bool = True
    pattern: str = DEFAULT_TOKEN_PATTERN
    stem: bool = False
    _regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_regex", re.compile(self.pattern))

    @cached_property
    def _stemmer(self) -> Callable[[str], str]:
        from nltk.stem import PorterStemmer

        return PorterStemmer().stem

    def _normalize(self, token: str) -> str:
        if self.lowercase:
            token = token.lower()
        if self.stem:
            token = self._stemmer(token)
        return token

    def tokenize(self, text: str) -> List[str]:
        return [self._normalize(m.group()) for m in self._regex.finditer(text or "")]

    def spans(self, text: str) -> Iterator[Tuple[str, int, int]]:
        """Tokens with their character offsets in `text`."""
        for m in self._regex.finditer(text or ""):
            yield self._normalize(m.group()), m.start(), m.end()


def content_tokens(tokens: List[str]) -> List[str]:
    return [t for t in tokens if t not in STOPWORDS]
