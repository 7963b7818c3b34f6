"""
Shared pieces of the interpretation regressions: candidate keys, the
per-video covariate table and predicted-outcome fits.

Export tables consumed here (all restricted to the holdout split):

    text attention   video_id, field, outcome, position, piece, brand, brand_name, weight
    moment attention video_id, outcome, moment, weight, CI_<category> ...
    item stats       video_id, outcome, data_type, category, mean_gradient, size_pct
    predictions      video_id, outcome, source, prediction
"""

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import structlog

from app.errors import ConvergenceError, DataError, SingularDesignError
from app.ingest.brands import BrandLexicon
from app.ingest.features import (
    CONTROL_COLUMNS,
    CONTROL_FACTORS,
    INFLUENCER_FE,
    structured_frame,
    text_covariates,
)
from app.models.results import FitResult, FitTerm
from app.models.schemas import ItemCategory, Modality, Outcome, SoundCategory, TextField, VideoRecord
from app.stats.design import DesignSpec
from app.stats.logit import fit_logit
from app.stats.ols import fit_ols

logger = structlog.get_logger()

HOLDOUT = "holdout"
COMBINED_SOURCE = "combined"
IMAGE_DATA_TYPES = ("thumbnail", "avg5")
HUMAN_MUSIC = f"{SoundCategory.HUMAN.value}:{SoundCategory.MUSIC.value}"
BRAND_AUDIO = "BRAND_AUDIO"
BRAND_ANY = "BRAND_ANY"

StepTerms = Dict[str, Optional[FitTerm]]


# ============================================================================
# Keys and column names
# ============================================================================


def candidate_key(modality: Modality, data_type: str, element: str, outcome: Outcome) -> str:
    return f"{modality.value}|{data_type}|{element}|{outcome.value}"


def parse_key(key: str) -> Tuple[Modality, str, str, Outcome]:
    try:
        modality, data_type, element, outcome = key.split("|")
        return Modality(modality), data_type, element, Outcome(outcome)
    except ValueError as e:
        raise DataError(f"Malformed relationship key '{key}'") from e


def ci_column(category: str) -> str:
    return f"CI_{category}"


def duration_column(category: str) -> str:
    return f"DUR_{category}"


def size_column(data_type: str, category: str) -> str:
    return f"SIZE_{data_type}_{category}"


def text_eq8_column(field: TextField) -> str:
    return f"BITX_{field.value}"


# ============================================================================
# Inputs
# ============================================================================


def holdout_only(table: pd.DataFrame) -> pd.DataFrame:
    """Rows tagged holdout; tables without a split column are taken as holdout"""
    if "split" not in table.columns:
        return table
    return table[table["split"] == HOLDOUT]


def control_spec(outcome_column: str, covariates: Sequence[str],
                 interactions: Sequence[Tuple[str, str]] = (), center: Sequence[str] = (),
                 reported: Optional[Sequence[str]] = None, with_controls: bool = True) -> DesignSpec:
    """Influencer fixed effects plus the structured controls X_it"""
    return DesignSpec(
        outcome=outcome_column,
        covariates=list(covariates) + (list(CONTROL_COLUMNS) if with_controls else []),
        factors=[INFLUENCER_FE] + (list(CONTROL_FACTORS) if with_controls else []),
        interactions=list(interactions),
        center=list(center),
        cluster=INFLUENCER_FE,
        reported=list(reported) if reported is not None else (
            list(covariates) + [f"{a}:{b}" for a, b in interactions]
        ),
    )


def video_covariates(records: Sequence[VideoRecord], lexicon: BrandLexicon,
                     moments: Optional[pd.DataFrame] = None,
                     items: Optional[pd.DataFrame] = None) -> pd.DataFrame:
    """
    One row per video: structured controls, factors, text covariates,
    category durations (sum of moment indicators), item sizes per data type
    and the brand indicators used by the audio and cross-modal regressions.
    """
    frame = structured_frame(records).join(text_covariates(records, lexicon))
    frame[BRAND_AUDIO] = frame[f"BITX_{TextField.CAPTIONS.value}"]
    frame[BRAND_ANY] = frame[[f"BITX_{f.value}" for f in TextField]].max(axis=1)

    if moments is not None and len(moments):
        indicators = moments.drop_duplicates(["video_id", "moment"])
        cats = [c.value for c in SoundCategory]
        sums = indicators.groupby("video_id")[[ci_column(c) for c in cats]].sum()
        sums.columns = [duration_column(c) for c in cats]
        both = (indicators[ci_column(SoundCategory.HUMAN.value)] * indicators[ci_column(SoundCategory.MUSIC.value)])
        sums[duration_column(HUMAN_MUSIC)] = both.groupby(indicators["video_id"]).sum()
        frame = frame.join(sums)

    if items is not None and len(items):
        sizes = items.drop_duplicates(["video_id", "data_type", "category"])
        for data_type in IMAGE_DATA_TYPES:
            block = sizes[sizes["data_type"] == data_type]
            wide = block.pivot(index="video_id", columns="category", values="size_pct")
            for category in ItemCategory:
                column = size_column(data_type, category.value)
                values = wide[category.value] if category.value in wide.columns else pd.Series(dtype=float)
                frame[column] = values.reindex(frame.index).fillna(0.0)
    return frame


def prediction_series(predictions: pd.DataFrame, source: str, outcome: Outcome) -> pd.Series:
    """Holdout predictions of one source for one outcome, indexed by video_id"""
    block = holdout_only(predictions)
    block = block[(block["source"] == source) & (block["outcome"] == outcome.value)]
    return block.set_index("video_id")["prediction"].astype(np.float64)


# ============================================================================
# Fitting
# ============================================================================


def fit_predicted_outcome(frame: pd.DataFrame, outcome: Outcome, spec: DesignSpec,
                          equation_id: str) -> FitResult:
    """
    OLS on the predicted outcome, or a logistic regression on the predicted
    class for sentiment. A constant predicted class yields an empty result.
    """
    try:
        if outcome.is_binary:
            labels = (frame[spec.outcome] > 0.5).astype(np.float64)
            if labels.nunique() < 2:
                logger.warning("constant_predicted_class", equation_id=equation_id)
                return FitResult(equation_id=equation_id, model_kind="logit", n_obs=len(frame),
                                 df_resid=0, notes=["predicted class is constant"])
            data = frame.assign(**{spec.outcome: labels})
            return fit_logit(spec, data, equation_id, on_singular="drop")
        return fit_ols(spec, frame, equation_id, on_singular="drop")
    except (ConvergenceError, SingularDesignError, DataError) as e:
        logger.warning("regression_failed", equation_id=equation_id, error=str(e))
        return FitResult(equation_id=equation_id, model_kind="logit" if outcome.is_binary else "ols",
                         n_obs=len(frame), df_resid=0, notes=[f"failed: {e}"])


def fit_attention(frame: pd.DataFrame, spec: DesignSpec, equation_id: str) -> FitResult:
    try:
        return fit_ols(spec, frame, equation_id, on_singular="drop")
    except (SingularDesignError, DataError) as e:
        logger.warning("regression_failed", equation_id=equation_id, error=str(e))
        return FitResult(equation_id=equation_id, model_kind="ols", n_obs=len(frame),
                         df_resid=0, notes=[f"failed: {e}"])


def log_weights(weights: pd.Series, context: str) -> np.ndarray:
    values = weights.to_numpy(dtype=np.float64)
    if np.any(~(values > 0)):
        raise DataError(f"{context}: attention weights must be positive (softmax-derived)")
    return np.log(values)
