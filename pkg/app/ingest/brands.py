"""
Brand mention matching and sponsorship disclosure detection.

Matching is case-insensitive and whole-word: a brand inside a longer word
("iphonecase") does not count.
"""

import re
from typing import Iterable, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from app.text.normalize import normalize_text

DISCLOSURE_WORDS = ["ad", "ads", "advertisement", "advertisements", "sponsor", "sponsors", "sponsored"]

_DISCLOSURE_RE = re.compile(
    r"(?<!\w)(?:" + "|".join(DISCLOSURE_WORDS) + r")(?!\w)",
    re.IGNORECASE,
)


class BrandLexicon(BaseModel):
    """Brand names and their normalized matching forms"""

    names: List[str] = Field(default_factory=list)

    @field_validator("names")
    @classmethod
    def _unique(cls, names: List[str]) -> List[str]:
        seen = set()
        for name in names:
            form = normalize_text(name).strip()
            if not form:
                raise ValueError("Empty brand name")
            if form in seen:
                raise ValueError(f"Duplicate brand after normalization: '{name}'")
            seen.add(form)
        return names

    @property
    def forms(self) -> List[str]:
        return [normalize_text(name).strip() for name in self.names]

    def pattern(self) -> Optional[re.Pattern]:
        if not self.names:
            return None
        # Longest first so a nested shorter brand never pre-empts a longer one.
        forms = sorted(self.forms, key=lambda f: (-len(f), f))
        return re.compile(
            r"(?<!\w)(?:" + "|".join(re.escape(f) for f in forms) + r")(?!\w)",
            re.IGNORECASE,
        )

    @classmethod
    def from_file(cls, path: str) -> "BrandLexicon":
        with open(path, "r", encoding="utf-8") as handle:
            return cls(names=[line.strip() for line in handle if line.strip()])


class BrandMatch(BaseModel):
    """All brand occurrences in one text"""

    spans: List[Tuple[int, int]] = Field(default_factory=list)
    bitx: bool = False
    first_half: bool = False
    second_half: bool = False


def brand_match(text: str, lexicon: BrandLexicon) -> BrandMatch:
    """
    Find whole-word brand mentions.

    A mention belongs to the first half when it starts before the character
    midpoint of the text, otherwise to the second half.
    """
    pattern = lexicon.pattern()
    if pattern is None or not text:
        return BrandMatch()
    spans = [(m.start(), m.end()) for m in pattern.finditer(text)]
    midpoint = len(text) / 2.0
    return BrandMatch(
        spans=spans,
        bitx=bool(spans),
        first_half=any(start < midpoint for start, _ in spans),
        second_half=any(start >= midpoint for start, _ in spans),
    )


def token_brand_flags(token_spans: Iterable[Tuple[int, int]], brand_spans: List[Tuple[int, int]]) -> List[bool]:
    """A token is a brand token when its source span overlaps a brand span"""
    flags = []
    for start, end in token_spans:
        flags.append(end > start and any(start < b_end and b_start < end for b_start, b_end in brand_spans))
    return flags


def disclosure_check(captions: str) -> bool:
    return bool(_DISCLOSURE_RE.search(captions or ""))
