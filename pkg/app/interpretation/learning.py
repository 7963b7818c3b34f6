"""
Learning-pattern test.

Within a category, each influencer's uploads are split into halves by
video number. Per half, the element is regressed on micro/mega indicators
and VideoNumber x group slopes with structured controls; an element shows
a learning pattern for a group when both halves' slopes are significant.
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from app.config.settings import settings
from app.errors import DataError, SingularDesignError
from app.ingest.features import CATEGORY_FE, CONTROL_COLUMNS, CONTROL_FACTORS, INFLUENCER_FE, video_numbers
from app.models.results import LearningContrast
from app.stats.design import DesignSpec
from app.stats.ols import fit_ols

logger = structlog.get_logger()

GROUPS = ("micro", "mega")


def influencer_group(subscribers: float) -> Optional[str]:
    if subscribers < settings.micro_subscriber_max:
        return "micro"
    if subscribers >= settings.mega_subscriber_min:
        return "mega"
    return None


def tag_halves(frame: pd.DataFrame) -> pd.DataFrame:
    """Adds video_number, half (1 or 2) and group columns"""
    numbers = video_numbers(frame)
    counts = frame.groupby(INFLUENCER_FE)[INFLUENCER_FE].transform("size")
    return frame.assign(
        video_number=numbers.astype(float),
        half=np.where(numbers < counts / 2.0, 1, 2),
        group=frame["subscriber_count"].map(influencer_group),
    )


def _fit_half(rows: pd.DataFrame, element: str, groups: List[str], equation_id: str):
    data = rows.copy()
    covariates = []
    for g in groups:
        data[g] = (data["group"] == g).astype(float)
        data[f"VN:{g}"] = data["video_number"] * data[g]
        covariates += [g, f"VN:{g}"]
    spec = DesignSpec(
        outcome=element,
        covariates=covariates + list(CONTROL_COLUMNS),
        factors=list(CONTROL_FACTORS),
        intercept=False,
        reported=[f"VN:{g}" for g in groups],
    )
    return fit_ols(spec, data, equation_id, on_singular="drop")


def learning_patterns(frame: pd.DataFrame, elements: Sequence[str],
                      categories: Optional[Sequence[str]] = None) -> Tuple[List[LearningContrast], float]:
    """
    Args:
        frame: per-video covariates (structured columns, subscriber_count,
            upload_timestamp and the element columns)
        elements: scalar element columns to test

    Returns:
        (contrasts per category, element and group; fraction significant in both halves)
    """
    minimum = settings.learning_min_group_videos
    tagged = tag_halves(frame)
    tagged = tagged[tagged["group"].notna()]
    categories = list(categories) if categories is not None else sorted(tagged[CATEGORY_FE].unique())

    contrasts: List[LearningContrast] = []
    for category in categories:
        block = tagged[tagged[CATEGORY_FE] == category]
        for element in elements:
            if element not in block.columns:
                raise DataError(f"Element column '{element}' missing")
            per_group: Dict[str, LearningContrast] = {
                g: LearningContrast(category_id=str(category), element=element, group=g) for g in GROUPS
            }
            for half in (1, 2):
                rows = block[block["half"] == half]
                present = []
                for g in GROUPS:
                    n = int((rows["group"] == g).sum())
                    if n < minimum:
                        per_group[g].skipped.append(f"half {half}: {n} videos < {minimum}")
                    else:
                        present.append(g)
                if not present:
                    continue
                rows = rows[rows["group"].isin(present)]
                try:
                    result = _fit_half(rows, element, present, f"eq9|{category}|{element}|h{half}")
                except (SingularDesignError, DataError) as e:
                    for g in present:
                        per_group[g].skipped.append(f"half {half}: {e}")
                    continue
                for g in present:
                    setattr(per_group[g], f"half{half}", result.term(f"VN:{g}"))
            for g in GROUPS:
                if per_group[g].skipped:
                    logger.info("learning_group_skipped", category=category, element=element,
                                group=g, reasons=per_group[g].skipped)
                contrasts.append(per_group[g])

    tested = [c for c in contrasts if c.half1 is not None and c.half2 is not None]
    fraction = sum(c.significant_in_both for c in tested) / len(tested) if tested else 0.0
    logger.info("learning_patterns_tested", relationships=len(tested), significant_both=round(fraction, 4))
    return contrasts, fraction
