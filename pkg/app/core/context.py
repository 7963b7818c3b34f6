"""
Shared inputs of every stage: records, lexicon, split, outcome table,
ground truth and the artifact layout of one output directory.
"""

import os
from functools import cached_property
from typing import Dict, List, Optional

import pandas as pd
import structlog

from app.errors import DataError, MissingArtifactError
from app.ingest.brands import BrandLexicon
from app.ingest.outcomes import outcome_table
from app.ingest.records import load_manifest, records_by_id
from app.ingest.splits import DatasetSplit, split_dataset
from app.models.schemas import RunConfig, VideoRecord
from app.synth.generator import load_truth

logger = structlog.get_logger()

MANIFEST = "manifest.jsonl"
LEXICON = "brands.txt"
TRUTH = "ground_truth.json"
SPLIT = "split.json"


class RunContext:
    """Lazily loaded inputs for one run configuration"""

    def __init__(self, config: RunConfig):
        self.config = config
        self.out = config.out

    # ------------------------------------------------------------------
    # Layout
    # ------------------------------------------------------------------

    def path(self, *parts: str) -> str:
        full = os.path.join(self.out, *parts)
        os.makedirs(os.path.dirname(full), exist_ok=True)
        return full

    def models_path(self, name: str) -> str:
        return self.path("models", name)

    def slice_path(self, area: str, name: str, which: Optional[str] = None) -> str:
        """<out>/<area>/<slice>/<name>"""
        return self.path(area, which or self.config.slice.value, name)

    # ------------------------------------------------------------------
    # Inputs
    # ------------------------------------------------------------------

    @property
    def manifest_path(self) -> str:
        return self.config.dataset or os.path.join(self.out, MANIFEST)

    @cached_property
    def records(self) -> List[VideoRecord]:
        if not os.path.exists(self.manifest_path):
            raise MissingArtifactError("dataset", self.manifest_path, "synth")
        return load_manifest(self.manifest_path)

    @cached_property
    def by_id(self) -> Dict[str, VideoRecord]:
        return records_by_id(self.records)

    @cached_property
    def lexicon(self) -> BrandLexicon:
        path = self.config.extras.get("lexicon") or os.path.join(os.path.dirname(self.manifest_path), LEXICON)
        if not os.path.exists(path):
            logger.warning("brand_lexicon_missing", path=path)
            return BrandLexicon()
        return BrandLexicon.from_file(path)

    @cached_property
    def truth(self) -> Optional[dict]:
        path = os.path.join(os.path.dirname(self.manifest_path), TRUTH)
        return load_truth(path) if os.path.exists(path) else None

    @cached_property
    def outcomes(self) -> pd.DataFrame:
        return outcome_table(self.records)

    @cached_property
    def split(self) -> DatasetSplit:
        """Created by the first stage that needs it and reused afterwards"""
        path = os.path.join(self.out, SPLIT)
        if os.path.exists(path):
            split = DatasetSplit.load(path)
            if set(split.train) | set(split.validation) | set(split.holdout) != set(self.by_id):
                raise DataError(f"{path} does not match the dataset; remove it to re-split")
            return split
        split = split_dataset(self.records, self.config.seed)
        split.save(self.path(SPLIT))
        return split

    def split_records(self, name: str) -> List[VideoRecord]:
        return [self.by_id[vid] for vid in self.split.ids(name)]

    def outcome_values(self, outcome, ids: List[str]):
        return self.outcomes.loc[ids, outcome.value].to_numpy(dtype=float)
