"""
Brand-level heterogeneity and cross-modal interactions of brand mentions.
"""

from typing import List, Optional

import numpy as np
import pandas as pd
import structlog

from app.fusion.linear import fit_linear
from app.ingest.features import INFLUENCER_FE
from app.interpretation.common import (
    BRAND_ANY,
    COMBINED_SOURCE,
    control_spec,
    duration_column,
    fit_predicted_outcome,
    prediction_series,
    size_column,
)
from app.interpretation.text import FIELD_SOURCES, token_frame
from app.models.results import FitResult
from app.models.schemas import ItemCategory, LinearKind, Outcome, SoundCategory, TextField
from app.stats.design import factor_dummies, interaction_name

logger = structlog.get_logger()

HETEROGENEITY_LAMBDA = 1.0


def quadrant(attention_coef: float, outcome_coef: float) -> str:
    return f"A{'+' if attention_coef >= 0 else '-'}/O{'+' if outcome_coef >= 0 else '-'}"


def _ridge_coefficients(frame: pd.DataFrame, target: np.ndarray, columns: List[str], lam: float) -> dict:
    dummies = factor_dummies(frame[INFLUENCER_FE], INFLUENCER_FE)
    X = pd.concat([frame[columns].astype(float), dummies], axis=1)
    model = fit_linear(X.to_numpy(), target, LinearKind.RIDGE, lam, columns=list(X.columns))
    return dict(zip(model.columns, model.coefficients))


def brand_heterogeneity(attention: pd.DataFrame, predictions: pd.DataFrame, covariates: pd.DataFrame,
                        field: TextField, outcome: Outcome,
                        lam: float = HETEROGENEITY_LAMBDA) -> pd.DataFrame:
    """
    Per brand: ridge coefficient of its own token indicator on log attention
    and of its own mention indicator on the predicted outcome.

    Returns:
        columns brand, attention_coef, outcome_coef, quadrant, tokens, videos
    """
    tokens = token_frame(attention, covariates, field, outcome)
    brands = sorted(b for b in tokens["brand_name"].dropna().unique() if b)
    if not brands:
        return pd.DataFrame(columns=["brand", "attention_coef", "outcome_coef", "quadrant", "tokens", "videos"])

    brand_cols = [f"B[{b}]" for b in brands]
    for b, col in zip(brands, brand_cols):
        tokens[col] = (tokens["brand_name"] == b).astype(float)
    attention_coefs = _ridge_coefficients(tokens, tokens["log_weight"].to_numpy(), brand_cols + ["LOTX", "TP"], lam)

    pred = prediction_series(predictions, FIELD_SOURCES[field].value, outcome)
    videos = covariates.join(pred.rename("predicted"), how="inner")
    mentioned = videos[f"BRANDS_{field.value}"].fillna("").str.split("|")
    for b, col in zip(brands, brand_cols):
        videos[col] = mentioned.map(lambda names, b=b: float(b in names))
    outcome_coefs = _ridge_coefficients(videos, videos["predicted"].to_numpy(),
                                        brand_cols + [f"LOTX_{field.value}"], lam)

    rows = []
    for b, col in zip(brands, brand_cols):
        a, o = attention_coefs[col], outcome_coefs[col]
        rows.append({
            "brand": b,
            "attention_coef": a,
            "outcome_coef": o,
            "quadrant": quadrant(a, o),
            "tokens": int(tokens[col].sum()),
            "videos": int(videos[col].sum()),
        })
    logger.info("brand_heterogeneity_fitted", field=field.value, outcome=outcome.value, brands=len(rows))
    return pd.DataFrame(rows)


CROSS_MODAL_PARTNERS = [
    duration_column(SoundCategory.MUSIC.value),
    size_column("avg5", ItemCategory.PERSONS.value),
    size_column("avg5", ItemCategory.ANIMAL.value),
]


def cross_modal_interactions(predictions: pd.DataFrame, covariates: pd.DataFrame,
                             outcome: Outcome = Outcome.SENTIMENT,
                             source: str = COMBINED_SOURCE) -> FitResult:
    """Brand mention x (music duration, person size, animal size) on the predicted outcome"""
    partners = [c for c in CROSS_MODAL_PARTNERS if c in covariates.columns]
    pred = prediction_series(predictions, source, outcome)
    frame = covariates.join(pred.rename("predicted"), how="inner")
    interactions = [(BRAND_ANY, p) for p in partners]
    spec = control_spec("predicted", [BRAND_ANY] + partners, interactions=interactions,
                        reported=[interaction_name(a, b) for a, b in interactions])
    return fit_predicted_outcome(frame, outcome, spec, f"cross_modal|{outcome.value}")
