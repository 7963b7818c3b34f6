"""
Greedy longest-match word-piece tokenizer with source spans.

Spans index into the normalized text (lowercased, accents stripped), so the
spans of the non-special tokens concatenate to that text minus whitespace.
"""

from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.ingest.brands import BrandLexicon, brand_match, token_brand_flags
from app.text.normalize import is_punctuation, normalize_text
from app.text.vocab import CLS, PAD, SEP, UNK, Vocab

MAX_CHARS_PER_WORD = 100


class TokenKind(str, Enum):
    CLS = "CLS"
    SEP = "SEP"
    PAD = "PAD"
    UNK = "UNK"
    WORD = "word"


SPECIAL_KINDS = (TokenKind.CLS, TokenKind.SEP, TokenKind.PAD)


class TokenSequence(BaseModel):
    """Model input for one text with alignment metadata"""

    ids: List[int]
    pieces: List[str]
    kinds: List[TokenKind]
    spans: List[Tuple[int, int]]
    brand_flags: List[bool]
    text: str = Field(default="", description="Normalized source text the spans index into")

    @model_validator(mode="after")
    def _check_layout(self):
        n = len(self.ids)
        if not (len(self.pieces) == len(self.kinds) == len(self.spans) == len(self.brand_flags) == n):
            raise ValueError("TokenSequence fields must have equal lengths")
        if n < 2 or self.kinds[0] is not TokenKind.CLS:
            raise ValueError("TokenSequence must start with CLS")
        if self.kinds[self.length - 1] is not TokenKind.SEP:
            raise ValueError("Last non-PAD token must be SEP")
        return self

    @property
    def length(self) -> int:
        """Tokens before padding"""
        count = len(self.kinds)
        while count > 0 and self.kinds[count - 1] is TokenKind.PAD:
            count -= 1
        return count

    @property
    def word_positions(self) -> List[int]:
        """Indices of tokens that are neither CLS, SEP nor PAD"""
        return [i for i, kind in enumerate(self.kinds) if kind not in SPECIAL_KINDS]

    def padded(self, total: int) -> "TokenSequence":
        extra = total - len(self.ids)
        if extra <= 0:
            return self
        end = len(self.text)
        return TokenSequence(
            ids=self.ids + [0] * extra,
            pieces=self.pieces + [PAD] * extra,
            kinds=self.kinds + [TokenKind.PAD] * extra,
            spans=self.spans + [(end, end)] * extra,
            brand_flags=self.brand_flags + [False] * extra,
            text=self.text,
        )


def basic_split(text: str) -> List[Tuple[str, Tuple[int, int]]]:
    """Split normalized text on whitespace and around punctuation"""
    words = []
    start = None
    for i, ch in enumerate(text):
        if ch.isspace() or is_punctuation(ch):
            if start is not None:
                words.append((text[start:i], (start, i)))
                start = None
            if is_punctuation(ch):
                words.append((ch, (i, i + 1)))
        elif start is None:
            start = i
    if start is not None:
        words.append((text[start:], (start, len(text))))
    return words


def wordpiece(word: str, offset: int, vocab: Vocab) -> List[Tuple[str, Tuple[int, int]]]:
    """Greedy longest-prefix pieces; any unmatched remainder makes the whole word UNK"""
    span = (offset, offset + len(word))
    if len(word) > MAX_CHARS_PER_WORD:
        return [(UNK, span)]
    pieces = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            candidate = word[start:end] if start == 0 else "##" + word[start:end]
            if candidate in vocab:
                match = candidate
                break
            end -= 1
        if match is None:
            return [(UNK, span)]
        pieces.append((match, (offset + start, offset + end)))
        start = end
    return pieces


def tokenize(text: str, vocab: Vocab, lexicon: Optional[BrandLexicon] = None,
             max_len: Optional[int] = None) -> TokenSequence:
    """
    Normalize, split and word-piece a text; CLS first, SEP last.

    With `max_len`, word pieces beyond max_len - 2 are dropped.
    """
    normalized = normalize_text(text)
    body: List[Tuple[str, Tuple[int, int]]] = []
    for word, (start, _) in basic_split(normalized):
        body.extend(wordpiece(word, start, vocab))
    if max_len is not None:
        body = body[:max(0, max_len - 2)]

    end = len(normalized)
    pieces = [CLS] + [p for p, _ in body] + [SEP]
    spans = [(0, 0)] + [s for _, s in body] + [(end, end)]
    kinds = [TokenKind.CLS] + [TokenKind.UNK if p == UNK else TokenKind.WORD for p, _ in body] + [TokenKind.SEP]

    brand_spans = brand_match(normalized, lexicon).spans if lexicon is not None else []
    flags = token_brand_flags(spans, brand_spans)

    return TokenSequence(
        ids=[vocab.id_of(p) for p in pieces],
        pieces=pieces,
        kinds=kinds,
        spans=spans,
        brand_flags=flags,
        text=normalized,
    )


def pad_batch(sequences: Sequence[TokenSequence]) -> Tuple[List[TokenSequence], np.ndarray, np.ndarray]:
    """Pad to the batch maximum; returns sequences, ids (N, T) and PAD mask (N, T)"""
    total = max(len(s.ids) for s in sequences)
    padded = [s.padded(total) for s in sequences]
    ids = np.array([s.ids for s in padded], dtype=np.int64)
    mask = np.array([[k is TokenKind.PAD for k in s.kinds] for s in padded], dtype=bool)
    return padded, ids, mask
