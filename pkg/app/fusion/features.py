"""
Combined-model feature matrix: structured features (factors dummy-encoded)
plus the six unstructured prediction columns, scaled to unit L2 norm.
"""

from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, Field

from app.errors import DataError
from app.ingest.features import (
    CATEGORY_FE,
    DAY_FE,
    INFLUENCER_FE,
    NUMERIC_COLUMNS,
    TIME_FE,
    group_of_column,
)
from app.models.schemas import PredictionSource
from app.stats.design import factor_dummies

logger = structlog.get_logger()

SOURCE_GROUPS = {
    PredictionSource.TITLE: "Title",
    PredictionSource.DESCRIPTION: "Description (first 160c)",
    PredictionSource.CAPTIONS: "Captions/transcript (first 30s)",
    PredictionSource.AUDIO: "Audio (first 30s)",
    PredictionSource.THUMBNAIL: "Thumbnail",
    PredictionSource.FRAMES: "Video Frames (0s,7.5s,15s,22.5s,30s)",
}


def prediction_column(source: PredictionSource) -> str:
    return f"pred_{source.value}"


class FeatureMatrix(BaseModel):
    """Rows are videos; `groups` maps every column to its feature class"""

    model_config = {"arbitrary_types_allowed": True}

    values: np.ndarray
    columns: List[str]
    index: List[str]
    groups: Dict[str, str] = Field(default_factory=dict)
    norms: Dict[str, float] = Field(default_factory=dict)
    dropped: List[str] = Field(default_factory=list)

    @property
    def shape(self):
        return self.values.shape

    def rows(self, ids: Sequence[str]) -> "FeatureMatrix":
        position = {vid: i for i, vid in enumerate(self.index)}
        missing = [vid for vid in ids if vid not in position]
        if missing:
            raise DataError(f"{len(missing)} videos missing from feature matrix, e.g. {missing[0]}")
        take = [position[vid] for vid in ids]
        return self.model_copy(update={"values": self.values[take], "index": list(ids)})

    def select(self, columns: Sequence[str]) -> "FeatureMatrix":
        take = [self.columns.index(c) for c in columns]
        return self.model_copy(update={
            "values": self.values[:, take],
            "columns": list(columns),
            "groups": {c: self.groups[c] for c in columns},
        })


def encode_features(structured: pd.DataFrame, predictions: Optional[pd.DataFrame] = None,
                    include_category_fe: bool = True,
                    sources: Sequence[PredictionSource] = tuple(PredictionSource)) -> pd.DataFrame:
    """
    Raw (unscaled) design columns. `predictions` is indexed by video_id with
    one column per prediction source value.
    """
    blocks = [structured[NUMERIC_COLUMNS].astype(np.float64)]
    factors = [INFLUENCER_FE, DAY_FE, TIME_FE]
    if include_category_fe:
        factors.insert(1, CATEGORY_FE)
    for factor in factors:
        blocks.append(factor_dummies(structured[factor], factor))
    if predictions is not None:
        preds = predictions.reindex(structured.index)
        missing = [s.value for s in sources if s.value not in preds.columns]
        if missing:
            raise DataError(f"Prediction columns missing: {', '.join(missing)}")
        if preds[[s.value for s in sources]].isna().any().any():
            raise DataError("Predictions missing for some videos")
        blocks.append(pd.DataFrame(
            {prediction_column(s): preds[s.value].astype(np.float64) for s in sources},
            index=structured.index,
        ))
    return pd.concat(blocks, axis=1)


def _group(column: str) -> str:
    for source, label in SOURCE_GROUPS.items():
        if column == prediction_column(source):
            return label
    return group_of_column(column)


def build_feature_matrix(raw: pd.DataFrame, train_ids: Sequence[str]) -> FeatureMatrix:
    """
    Scale every column by its L2 norm over the training rows; columns whose
    training norm is zero are dropped and logged.
    """
    train = raw.loc[list(train_ids)]
    norms = np.sqrt((train.to_numpy() ** 2).sum(axis=0))
    keep = norms > 0
    dropped = [c for c, k in zip(raw.columns, keep) if not k]
    if dropped:
        logger.warning("zero_norm_columns_dropped", columns=dropped)
    columns = [c for c, k in zip(raw.columns, keep) if k]
    values = raw[columns].to_numpy() / norms[keep]
    return FeatureMatrix(
        values=values,
        columns=columns,
        index=[str(i) for i in raw.index],
        groups={c: _group(c) for c in columns},
        norms={c: float(n) for c, n in zip(columns, norms[keep])},
        dropped=dropped,
    )
