"""
Image regressions, thumbnail and average-of-five-frames as separate data types.

Step 1 (per category): mean gradient ~ item size + FE + controls
Step 2: predicted ~ all seven category sizes + FE + controls
"""

from typing import Sequence

import pandas as pd
import structlog

from app.interpretation.common import (
    IMAGE_DATA_TYPES,
    candidate_key,
    control_spec,
    fit_attention,
    fit_predicted_outcome,
    holdout_only,
    prediction_series,
    size_column,
)
from app.interpretation.text import StepOutput
from app.models.schemas import ItemCategory, Modality, Outcome, PredictionSource

logger = structlog.get_logger()

DATA_TYPE_SOURCES = {
    "thumbnail": PredictionSource.THUMBNAIL,
    "avg5": PredictionSource.FRAMES,
}


def image_step1(items: pd.DataFrame, covariates: pd.DataFrame, outcomes: Sequence[Outcome]) -> StepOutput:
    out = StepOutput()
    stats = holdout_only(items)
    for outcome in outcomes:
        for data_type in IMAGE_DATA_TYPES:
            for category in ItemCategory:
                key = candidate_key(Modality.IMAGE, data_type, category.value, outcome)
                rows = stats[(stats["outcome"] == outcome.value) & (stats["data_type"] == data_type)
                             & (stats["category"] == category.value)]
                if rows.empty:
                    logger.info("item_category_absent", outcome=outcome.value, data_type=data_type,
                                category=category.value)
                    out.terms[key] = None
                    continue
                frame = rows.join(covariates, on="video_id")
                spec = control_spec("mean_gradient", ["size_pct"])
                result = fit_attention(frame, spec, f"eq6|{outcome.value}|{data_type}|{category.value}")
                out.results.append(result)
                out.terms[key] = result.term("size_pct")
    return out


def image_step2(predictions: pd.DataFrame, covariates: pd.DataFrame, outcomes: Sequence[Outcome]) -> StepOutput:
    out = StepOutput()
    for outcome in outcomes:
        for data_type in IMAGE_DATA_TYPES:
            pred = prediction_series(predictions, DATA_TYPE_SOURCES[data_type].value, outcome)
            frame = covariates.join(pred.rename("predicted"), how="inner")
            sizes = [size_column(data_type, c.value) for c in ItemCategory]
            spec = control_spec("predicted", sizes)
            result = fit_predicted_outcome(frame, outcome, spec, f"eq7|{outcome.value}|{data_type}")
            out.results.append(result)
            for category in ItemCategory:
                key = candidate_key(Modality.IMAGE, data_type, category.value, outcome)
                out.terms[key] = result.term(size_column(data_type, category.value))
    return out


def image_steps(items: pd.DataFrame, predictions: pd.DataFrame, covariates: pd.DataFrame,
                outcomes: Sequence[Outcome]):
    """Returns (step 1 output, step 2 output)"""
    step1 = image_step1(items, covariates, outcomes)
    step2 = image_step2(predictions, covariates, outcomes)
    logger.info("image_steps_fitted", step1=len(step1.results), step2=len(step2.results))
    return step1, step2
