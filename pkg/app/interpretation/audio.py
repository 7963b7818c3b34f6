"""
Audio regressions.

Step 1 (moment level):
    log(attention) ~ sum_z CI(z) + CI(Human):CI(Music) + location + FE + controls
Step 2 (video level):
    predicted ~ sum_z DUR(z) + DUR(Human:Music) + brand indicator + FE + controls

Source-ambiguous, background and natural sounds enter as controls only.
"""

from typing import Sequence

import pandas as pd
import structlog

from app.interpretation.common import (
    BRAND_AUDIO,
    HUMAN_MUSIC,
    candidate_key,
    ci_column,
    control_spec,
    duration_column,
    fit_attention,
    fit_predicted_outcome,
    holdout_only,
    log_weights,
    prediction_series,
)
from app.interpretation.text import StepOutput
from app.models.schemas import REPORTED_SOUND_CATEGORIES, Modality, Outcome, PredictionSource, SoundCategory

logger = structlog.get_logger()

AUDIO_DATA_TYPE = "audio"
CI_HUMAN_MUSIC = f"{ci_column(SoundCategory.HUMAN.value)}:{ci_column(SoundCategory.MUSIC.value)}"

AUDIO_ELEMENTS = [c.value for c in REPORTED_SOUND_CATEGORIES] + [HUMAN_MUSIC]


def step1_term(element: str) -> str:
    return CI_HUMAN_MUSIC if element == HUMAN_MUSIC else ci_column(element)


def step2_term(element: str) -> str:
    return duration_column(element)


def audio_step1(moments: pd.DataFrame, covariates: pd.DataFrame, outcomes: Sequence[Outcome]) -> StepOutput:
    out = StepOutput()
    cis = [ci_column(c.value) for c in SoundCategory]
    for outcome in outcomes:
        rows = holdout_only(moments)
        rows = rows[rows["outcome"] == outcome.value]
        frame = rows.join(covariates, on="video_id")
        frame = frame.assign(
            log_weight=log_weights(frame["weight"], f"moment attention {outcome.value}"),
            location=frame["moment"].astype(float),
        )
        spec = control_spec(
            "log_weight", cis + ["location"],
            interactions=[(ci_column(SoundCategory.HUMAN.value), ci_column(SoundCategory.MUSIC.value))],
            reported=[step1_term(e) for e in AUDIO_ELEMENTS] + ["location"],
        )
        result = fit_attention(frame, spec, f"eq4|{outcome.value}")
        out.results.append(result)
        for element in AUDIO_ELEMENTS:
            out.terms[candidate_key(Modality.AUDIO, AUDIO_DATA_TYPE, element, outcome)] = result.term(step1_term(element))
    return out


def audio_step2(predictions: pd.DataFrame, covariates: pd.DataFrame, outcomes: Sequence[Outcome]) -> StepOutput:
    out = StepOutput()
    durations = [duration_column(c.value) for c in SoundCategory] + [duration_column(HUMAN_MUSIC)]
    for outcome in outcomes:
        pred = prediction_series(predictions, PredictionSource.AUDIO.value, outcome)
        frame = covariates.join(pred.rename("predicted"), how="inner")
        spec = control_spec(
            "predicted", durations + [BRAND_AUDIO],
            reported=[step2_term(e) for e in AUDIO_ELEMENTS] + [BRAND_AUDIO],
        )
        result = fit_predicted_outcome(frame, outcome, spec, f"eq5|{outcome.value}")
        out.results.append(result)
        for element in AUDIO_ELEMENTS:
            out.terms[candidate_key(Modality.AUDIO, AUDIO_DATA_TYPE, element, outcome)] = result.term(step2_term(element))
    return out


def audio_steps(moments: pd.DataFrame, predictions: pd.DataFrame, covariates: pd.DataFrame,
                outcomes: Sequence[Outcome]):
    """Returns (step 1 output, step 2 output)"""
    step1 = audio_step1(moments, covariates, outcomes)
    step2 = audio_step2(predictions, covariates, outcomes)
    logger.info("audio_steps_fitted", step1=len(step1.results), step2=len(step2.results))
    return step1, step2
