"""60/20/20 train/validation/holdout split"""

import json
import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from app.errors import DataError
from app.models.schemas import VideoRecord

SPLIT_NAMES = ("train", "validation", "holdout")


class DatasetSplit(BaseModel):
    """Video ids per split"""

    train: List[str] = Field(default_factory=list)
    validation: List[str] = Field(default_factory=list)
    holdout: List[str] = Field(default_factory=list)
    seed: int = 0

    def ids(self, name: str) -> List[str]:
        if name not in SPLIT_NAMES:
            raise DataError(f"Unknown split '{name}'")
        return getattr(self, name)

    def tag_of(self) -> Dict[str, str]:
        return {vid: name for name in SPLIT_NAMES for vid in getattr(self, name)}

    def save(self, path: str):
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(self.model_dump(), handle, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "DatasetSplit":
        with open(path, "r", encoding="utf-8") as handle:
            return cls.model_validate(json.load(handle))


def split_sizes(n: int) -> Tuple[int, int, int]:
    """Validation and holdout take floor(20%); train takes the remainder"""
    if n < 5:
        raise DataError(f"Need at least 5 records to split, got {n}")
    tail = max(1, math.floor(0.2 * n))
    return n - 2 * tail, tail, tail


def split_dataset(records: Sequence[VideoRecord], seed: int) -> DatasetSplit:
    ids = [r.video_id for r in records]
    n_train, n_val, _ = split_sizes(len(ids))
    order = np.random.default_rng(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    return DatasetSplit(
        train=shuffled[:n_train],
        validation=shuffled[n_train:n_train + n_val],
        holdout=shuffled[n_train + n_val:],
        seed=seed,
    )
