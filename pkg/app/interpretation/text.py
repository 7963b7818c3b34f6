"""
Text regressions.

Step 1 (token level):
    log(attention) ~ BIT + LOTX + TP + influencer FE + controls
Step 1 with interactions adds BIT:LOTX and BIT:TP with LOTX mean-centered.

Step 2 (video level, predicted outcome of the field's model):
    main        ~ BITX + LOTX
    proportion  ~ BITX + LOTX + BITX:LOTX   (LOTX mean-centered)
    halves      ~ BIFTX + BISTX + LOTX
"""

from typing import Dict, List, Literal, Sequence, Tuple

import pandas as pd
import structlog
from pydantic import BaseModel, Field

from app.models.results import FitResult
from app.models.schemas import Modality, Outcome, PredictionSource, TextField
from app.interpretation.common import (
    StepTerms,
    candidate_key,
    control_spec,
    fit_attention,
    fit_predicted_outcome,
    holdout_only,
    log_weights,
    prediction_series,
)

logger = structlog.get_logger()

BRAND_ELEMENT = "brand"
SPECIAL_PIECES = ("[CLS]", "[SEP]", "[PAD]")

FIELD_SOURCES = {
    TextField.TITLE: PredictionSource.TITLE,
    TextField.DESCRIPTION: PredictionSource.DESCRIPTION,
    TextField.CAPTIONS: PredictionSource.CAPTIONS,
}

Step2Variant = Literal["main", "proportion", "halves"]


class StepOutput(BaseModel):
    """Fitted regressions plus the candidate terms they contribute"""

    results: List[FitResult] = Field(default_factory=list)
    terms: StepTerms = Field(default_factory=dict)


def token_frame(attention: pd.DataFrame, covariates: pd.DataFrame, field: TextField,
                outcome: Outcome) -> pd.DataFrame:
    """Holdout word-token rows of one field and outcome joined with video covariates"""
    rows = holdout_only(attention)
    rows = rows[(rows["field"] == field.value) & (rows["outcome"] == outcome.value)]
    rows = rows[~rows["piece"].isin(SPECIAL_PIECES)]
    frame = rows.join(covariates, on="video_id", rsuffix="_video")
    frame = frame.assign(
        log_weight=log_weights(frame["weight"], f"text attention {field.value}/{outcome.value}"),
        BIT=frame["brand"].astype(float),
        LOTX=frame[f"LOTX_{field.value}"],
        TP=frame["position"].astype(float),
    )
    return frame


def text_step1(attention: pd.DataFrame, covariates: pd.DataFrame,
               outcomes: Sequence[Outcome], fields: Sequence[TextField] = tuple(TextField)) -> StepOutput:
    out = StepOutput()
    for outcome in outcomes:
        for field in fields:
            frame = token_frame(attention, covariates, field, outcome)
            spec = control_spec("log_weight", ["BIT", "LOTX", "TP"])
            result = fit_attention(frame, spec, f"eq2|{outcome.value}|{field.value}")
            out.results.append(result)
            out.terms[candidate_key(Modality.TEXT, field.value, BRAND_ELEMENT, outcome)] = result.term("BIT")
    logger.info("text_step1_fitted", regressions=len(out.results))
    return out


def text_step1_interactions(attention: pd.DataFrame, covariates: pd.DataFrame,
                            outcomes: Sequence[Outcome],
                            fields: Sequence[TextField] = tuple(TextField)) -> List[FitResult]:
    results = []
    for outcome in outcomes:
        for field in fields:
            frame = token_frame(attention, covariates, field, outcome)
            spec = control_spec(
                "log_weight", ["BIT", "LOTX", "TP"],
                interactions=[("BIT", "LOTX"), ("BIT", "TP")],
                center=["LOTX"],
            )
            results.append(fit_attention(frame, spec, f"eqE1|{outcome.value}|{field.value}"))
    return results


def _step2_design(field: TextField, variant: Step2Variant) -> Tuple[List[str], List[Tuple[str, str]], List[str]]:
    bitx, lotx = f"BITX_{field.value}", f"LOTX_{field.value}"
    if variant == "main":
        return [bitx, lotx], [], []
    if variant == "proportion":
        return [bitx, lotx], [(bitx, lotx)], [lotx]
    return [f"BIFTX_{field.value}", f"BISTX_{field.value}", lotx], [], []


def text_step2(predictions: pd.DataFrame, covariates: pd.DataFrame, outcomes: Sequence[Outcome],
               variant: Step2Variant = "main",
               fields: Sequence[TextField] = tuple(TextField)) -> StepOutput:
    """Video-level regressions of each field model's holdout predictions"""
    out = StepOutput()
    equation = {"main": "eq3", "proportion": "eqE2", "halves": "eqE3"}[variant]
    for outcome in outcomes:
        for field in fields:
            pred = prediction_series(predictions, FIELD_SOURCES[field].value, outcome)
            frame = covariates.join(pred.rename("predicted"), how="inner")
            covs, interactions, center = _step2_design(field, variant)
            spec = control_spec("predicted", covs, interactions=interactions, center=center)
            result = fit_predicted_outcome(frame, outcome, spec, f"{equation}|{outcome.value}|{field.value}")
            out.results.append(result)
            if variant == "main":
                key = candidate_key(Modality.TEXT, field.value, BRAND_ELEMENT, outcome)
                out.terms[key] = result.term(f"BITX_{field.value}")
    return out
