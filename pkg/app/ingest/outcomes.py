"""
Outcome transforms.

    log_views       = ln(views)
    log_engagement  = ln((comments + 1) / views)
    log_popularity  = ln((likes + 1) / views)
    log_likeability = ln((likes + 1) / (dislikes + 1))
    sentiment       = mean comment score > threshold
"""

import math
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import structlog

from app.config.settings import settings
from app.errors import DataError
from app.models.schemas import OUTCOME_ORDER, OutcomeVector, VideoRecord

logger = structlog.get_logger()

SENTIMENT_TOL = 1e-12


def mean_comment_sentiment(record: VideoRecord) -> float:
    """Mean of the available comment scores; 0 when there are none"""
    if not record.comment_sentiments:
        return 0.0
    return math.fsum(record.comment_sentiments) / len(record.comment_sentiments)


def sentiment_threshold(records: Sequence[VideoRecord], override: Optional[float] = None) -> float:
    """Configured cut-off, else the corpus median of mean comment scores"""
    if override is None:
        override = settings.sentiment_threshold
    if override is not None:
        return float(override)
    if not records:
        raise DataError("Cannot derive a sentiment threshold from an empty corpus")
    return float(np.median([mean_comment_sentiment(r) for r in records]))


def compute_outcomes(record: VideoRecord, threshold: float) -> OutcomeVector:
    """Scores within SENTIMENT_TOL of the threshold count as not above it"""
    if record.views < 1:
        raise DataError(f"Video {record.video_id} has views = {record.views}; rate outcomes need views >= 1")
    score = mean_comment_sentiment(record)
    return OutcomeVector(
        log_views=math.log(record.views),
        log_engagement=math.log((record.comments + 1) / record.views),
        log_popularity=math.log((record.likes + 1) / record.views),
        log_likeability=math.log((record.likes + 1) / (record.dislikes + 1)),
        sentiment_binary=int(score > threshold + SENTIMENT_TOL),
        sentiment_score=score,
    )


def outcome_table(records: Sequence[VideoRecord], threshold: Optional[float] = None) -> pd.DataFrame:
    """One row per video (index video_id), one column per outcome plus sentiment_score"""
    if threshold is None:
        threshold = sentiment_threshold(records)
    rows = {}
    for record in records:
        rows[record.video_id] = compute_outcomes(record, threshold).model_dump()
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.index.name = "video_id"
    logger.info(
        "outcomes_computed",
        videos=len(table),
        sentiment_threshold=round(threshold, 6),
        positive_share=float(table["sentiment_binary"].mean()) if len(table) else 0.0,
    )
    return table[[o.value for o in OUTCOME_ORDER] + ["sentiment_score"]]
