"""
Joint cross-modal control: one regression per outcome with text, audio and
image terms together, used to drop Step-2 survivors explained by another
modality.
"""

from typing import List, Sequence, Tuple

import pandas as pd
import structlog

from app.interpretation.audio import step2_term as audio_term
from app.interpretation.common import (
    COMBINED_SOURCE,
    HUMAN_MUSIC,
    IMAGE_DATA_TYPES,
    StepTerms,
    control_spec,
    duration_column,
    fit_predicted_outcome,
    parse_key,
    prediction_series,
    size_column,
    text_eq8_column,
)
from app.models.results import FitResult
from app.models.schemas import ItemCategory, Modality, Outcome, SoundCategory, TextField

logger = structlog.get_logger()


def joint_columns() -> List[str]:
    text = [text_eq8_column(f) for f in TextField] + [f"LOTX_{f.value}" for f in TextField]
    audio = [duration_column(c.value) for c in SoundCategory] + [duration_column(HUMAN_MUSIC)]
    image = [size_column(d, c.value) for d in IMAGE_DATA_TYPES for c in ItemCategory]
    return text + audio + image


def eq8_term(key: str) -> str:
    modality, data_type, element, _ = parse_key(key)
    if modality is Modality.TEXT:
        return text_eq8_column(TextField(data_type))
    if modality is Modality.AUDIO:
        return audio_term(element)
    return size_column(data_type, element)


def joint_control(predictions: pd.DataFrame, covariates: pd.DataFrame, candidates: Sequence[str],
                  source: str = COMBINED_SOURCE) -> Tuple[StepTerms, List[FitResult]]:
    """
    Args:
        predictions: long prediction table; `source` rows are the dependent
        covariates: per-video covariate table
        candidates: relationship keys to look up in the joint fits

    Returns:
        (key -> joint-control term, fitted regressions); empty when there
        are no candidates
    """
    if not candidates:
        return {}, []
    outcomes = list(dict.fromkeys(parse_key(k)[3] for k in candidates))
    columns = [c for c in joint_columns() if c in covariates.columns]

    fits = {}
    for outcome in outcomes:
        pred = prediction_series(predictions, source, outcome)
        frame = covariates.join(pred.rename("predicted"), how="inner")
        spec = control_spec("predicted", columns)
        fits[outcome] = fit_predicted_outcome(frame, outcome, spec, f"eq8|{outcome.value}")

    terms = {key: fits[parse_key(key)[3]].term(eq8_term(key)) for key in candidates}
    logger.info("joint_control_fitted", outcomes=len(fits), candidates=len(candidates))
    return terms, list(fits.values())
