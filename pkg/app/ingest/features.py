"""
Structured feature table and per-video text covariates.

Columns are grouped into the feature classes used by the importance table;
factor columns are kept as strings and dummy-encoded by the consumers.
"""

from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.ingest.brands import BrandLexicon, brand_match, disclosure_check
from app.models.schemas import TextField, VideoRecord
from app.text.normalize import normalize_text

# ============================================================================
# Feature Classes
# ============================================================================

INFLUENCER_FE = "influencer_id"
CATEGORY_FE = "category_id"
DAY_FE = "day_of_week"
TIME_FE = "time_of_day_bucket"

FACTOR_COLUMNS = [INFLUENCER_FE, CATEGORY_FE, DAY_FE, TIME_FE]

# class label -> numeric columns
NUMERIC_GROUPS: Dict[str, List[str]] = {
    "Time based covariates": ["gap_scrape_days", "year", "gap_prev_days", "gap_next_days", "rank"],
    "Playlist Information": ["playlist_count", "playlist_avg_position", "playlist_avg_size"],
    "Total URLs in description": ["url_count_in_description"],
    "Video Length": ["video_length_min"],
    "Tags Count": ["tag_count"],
    "Captions Indicator": ["captions_present"],
    "Hashtag Indicator in Description": ["hashtag_in_description"],
}

# class label -> factor column
FACTOR_GROUPS: Dict[str, str] = {
    "Influencer Fixed Effects": INFLUENCER_FE,
    "Category Fixed Effects": CATEGORY_FE,
    "Time based covariates": DAY_FE,
}

NUMERIC_COLUMNS = [c for cols in NUMERIC_GROUPS.values() for c in cols]

# X_it of the interpretation regressions: everything but the category and influencer factors
CONTROL_COLUMNS = list(NUMERIC_COLUMNS)
CONTROL_FACTORS = [DAY_FE, TIME_FE]


def group_of_column(column: str) -> str:
    """Feature class of a structured column or of a dummy derived from a factor"""
    for label, cols in NUMERIC_GROUPS.items():
        if column in cols:
            return label
    for factor in FACTOR_COLUMNS:
        if column == factor or column.startswith(f"{factor}[") or column.startswith(f"{factor}_"):
            if factor in (DAY_FE, TIME_FE):
                return "Time based covariates"
            return next(label for label, f in FACTOR_GROUPS.items() if f == factor)
    return column


# ============================================================================
# Tables
# ============================================================================


def structured_frame(records: Sequence[VideoRecord]) -> pd.DataFrame:
    """One row per video: numeric structured columns plus factor columns as strings"""
    rows = []
    for r in records:
        row = {c: float(getattr(r, c)) for c in NUMERIC_COLUMNS}
        row.update({
            INFLUENCER_FE: r.influencer_id,
            CATEGORY_FE: r.category_id,
            DAY_FE: str(r.day_of_week),
            TIME_FE: str(r.time_of_day_bucket),
            "subscriber_count": float(r.subscriber_count),
            "upload_timestamp": r.upload_timestamp,
        })
        rows.append(row)
    frame = pd.DataFrame(rows, index=pd.Index([r.video_id for r in records], name="video_id"))
    return frame


def text_length(text: str) -> int:
    """LOTX: number of whitespace-separated words of the normalized text"""
    return len(normalize_text(text).split())


def text_covariates(records: Sequence[VideoRecord], lexicon: BrandLexicon,
                    fields: Optional[Sequence[TextField]] = None) -> pd.DataFrame:
    """
    Per video and text field: BITX, first/second-half brand flags, LOTX and
    the mentioned brand names. Columns are suffixed with the field name, e.g.
    BITX_title, LOTX_captions_30s.
    """
    fields = list(fields or TextField)
    forms = dict(zip(lexicon.forms, lexicon.names))
    rows = []
    for r in records:
        row = {}
        for field in fields:
            text = normalize_text(r.text(field))
            match = brand_match(text, lexicon)
            suffix = field.value
            row[f"BITX_{suffix}"] = float(match.bitx)
            row[f"BIFTX_{suffix}"] = float(match.first_half)
            row[f"BISTX_{suffix}"] = float(match.second_half)
            row[f"LOTX_{suffix}"] = float(text_length(text))
            row[f"BRANDS_{suffix}"] = "|".join(
                sorted({forms.get(text[s:e], text[s:e]) for s, e in match.spans})
            )
        row["disclosure"] = float(disclosure_check(r.captions_30s))
        rows.append(row)
    return pd.DataFrame(rows, index=pd.Index([r.video_id for r in records], name="video_id"))


def any_brand(covariates: pd.DataFrame) -> pd.Series:
    """Brand mentioned in any text field"""
    cols = [c for c in covariates.columns if c.startswith("BITX_")]
    return covariates[cols].max(axis=1) if cols else pd.Series(0.0, index=covariates.index)


def video_numbers(frame: pd.DataFrame) -> pd.Series:
    """Serial number of each video within its influencer, 0 for the first upload"""
    order = frame.sort_values(["upload_timestamp"], kind="mergesort")
    numbers = order.groupby(INFLUENCER_FE).cumcount()
    return numbers.reindex(frame.index).astype(np.int64)
