"""
Word-piece vocabulary.

File format: one piece per line, specials first. Continuation pieces carry
the "##" prefix.
"""

from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List

import structlog

from app.errors import DataError
from app.text.normalize import normalize_text

logger = structlog.get_logger()

PAD = "[PAD]"
UNK = "[UNK]"
CLS = "[CLS]"
SEP = "[SEP]"
SPECIALS = [PAD, UNK, CLS, SEP]


class Vocab:
    """Ordered, unique word pieces with the four special tokens at ids 0-3"""

    def __init__(self, pieces: Iterable[str]):
        entries = list(SPECIALS)
        for piece in pieces:
            if piece in SPECIALS:
                raise DataError(f"Regular piece '{piece}' collides with a special token")
            entries.append(piece)
        if len(set(entries)) != len(entries):
            duplicates = sorted({p for p in entries if entries.count(p) > 1})
            raise DataError(f"Duplicate vocabulary entries: {duplicates[:5]}")
        self.entries: List[str] = entries
        self.index: Dict[str, int] = {piece: i for i, piece in enumerate(entries)}

    @property
    def pad_id(self) -> int:
        return self.index[PAD]

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    @property
    def cls_id(self) -> int:
        return self.index[CLS]

    @property
    def sep_id(self) -> int:
        return self.index[SEP]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, piece: str) -> bool:
        return piece in self.index

    def id_of(self, piece: str) -> int:
        return self.index.get(piece, self.unk_id)

    def piece(self, token_id: int) -> str:
        return self.entries[token_id]

    # ------------------------------------------------------------------
    # Construction and IO
    # ------------------------------------------------------------------

    @classmethod
    def build(cls, texts: Iterable[str], size: int = 4096) -> "Vocab":
        """
        Top-`size` whole words by frequency (ties alphabetical) plus every
        seen character as a word-initial piece and a "##" continuation.
        """
        from app.text.tokenizer import basic_split

        words: Counter = Counter()
        chars = set()
        for text in texts:
            for word, _ in basic_split(normalize_text(text)):
                words[word] += 1
                chars.update(word)
        ranked = sorted(words.items(), key=lambda kv: (-kv[1], kv[0]))[:size]
        pieces = [w for w, _ in ranked]
        present = set(pieces)
        for ch in sorted(chars):
            if ch not in present:
                pieces.append(ch)
                present.add(ch)
        pieces.extend(f"##{ch}" for ch in sorted(chars))
        vocab = cls(pieces)
        logger.info("vocab_built", entries=len(vocab), whole_words=len(ranked), characters=len(chars))
        return vocab

    def save(self, path: str):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as handle:
            handle.write("\n".join(self.entries) + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocab":
        with open(path, "r", encoding="utf-8") as handle:
            lines = [line.rstrip("\n") for line in handle if line.rstrip("\n")]
        if lines[:len(SPECIALS)] != SPECIALS:
            raise DataError(f"{path}: vocabulary must start with {SPECIALS}")
        return cls(lines[len(SPECIALS):])
