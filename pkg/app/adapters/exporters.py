"""
CSV and JSON artifact writers, and the flattening of result objects into
export tables.
"""

import json
import os
from typing import Any, Iterable, List, Optional

import pandas as pd
import structlog
from pydantic import BaseModel

from app.interpretation.hypotheses import attention_effect, format_cell, outcome_effect
from app.models.results import FitResult, FitTerm, HypothesisSet, LearningContrast, Scorecard

logger = structlog.get_logger()

FLOAT_FORMAT = "%.10g"


def write_csv(frame: pd.DataFrame, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.debug("csv_written", path=path, rows=len(frame))
    return path


def read_csv(path: str) -> pd.DataFrame:
    return pd.read_csv(path, dtype={"video_id": str}, keep_default_na=False, na_values=[""])


def write_json(payload: Any, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
    logger.debug("json_written", path=path)
    return path


def write_text(text: str, path: str) -> str:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(text)
    return path


# ============================================================================
# Flattening
# ============================================================================


def _term_fields(prefix: str, term: Optional[FitTerm]) -> dict:
    if term is None:
        return {f"{prefix}_estimate": None, f"{prefix}_pct": None, f"{prefix}_p": None, f"{prefix}_tier": ""}
    return {f"{prefix}_estimate": term.estimate, f"{prefix}_pct": term.pct_change,
            f"{prefix}_p": term.p_value, f"{prefix}_tier": term.tier.value}


def fit_result_rows(results: Iterable[FitResult]) -> pd.DataFrame:
    """One row per reported term"""
    rows = []
    for result in results:
        for name, term in result.terms.items():
            rows.append({
                "equation_id": result.equation_id,
                "model_kind": result.model_kind,
                "n_obs": result.n_obs,
                "term": name,
                "estimate": term.estimate,
                "se": term.se,
                "statistic": term.statistic,
                "p_value": term.p_value,
                "tier": term.tier.value,
                "pct_change": term.pct_change,
                "penalized": result.penalized,
                "separation": result.separation,
                "dropped": "|".join(result.dropped),
            })
    return pd.DataFrame(rows, columns=["equation_id", "model_kind", "n_obs", "term", "estimate", "se",
                                       "statistic", "p_value", "tier", "pct_change", "penalized",
                                       "separation", "dropped"])


def hypothesis_rows(hypotheses: HypothesisSet) -> pd.DataFrame:
    rows = []
    for record in hypotheses.records:
        row = {
            "slice": hypotheses.slice,
            "key": record.key,
            "modality": record.modality.value,
            "data_type": record.data_type,
            "element": record.element,
            "outcome": record.outcome.value,
            "verdict": record.verdict.value,
            "passed": record.verdict.passed,
            "attention_effect": attention_effect(record),
            "outcome_effect": outcome_effect(record),
            "cell": format_cell(record),
        }
        for prefix, term in (("step1", record.step1), ("step2", record.step2), ("eq8", record.eq8)):
            row.update(_term_fields(prefix, term))
        rows.append(row)
    return pd.DataFrame(rows)


def learning_rows(contrasts: List[LearningContrast]) -> pd.DataFrame:
    rows = []
    for c in contrasts:
        row = {"category_id": c.category_id, "element": c.element, "group": c.group,
               "significant_in_both": c.significant_in_both, "skipped": "; ".join(c.skipped)}
        row.update(_term_fields("half1", c.half1))
        row.update(_term_fields("half2", c.half2))
        rows.append(row)
    return pd.DataFrame(rows)


def scorecard_rows(cards: Iterable[Scorecard]) -> pd.DataFrame:
    """Long table: one row per (video, outcome, element) plus an overall row"""
    rows = []
    for card in cards:
        for outcome, scores in card.element_scores.items():
            for element, score in scores.items():
                key = f"{outcome}|{element}"
                rows.append({"video_id": card.video_id, "outcome": outcome, "element": element,
                             "score": score, "weight": card.weights[outcome].get(element, 0.0),
                             "clipped": key in card.clipped, "degenerate": key in card.degenerate})
            rows.append({"video_id": card.video_id, "outcome": outcome, "element": "overall",
                         "score": card.overall[outcome], "weight": None, "clipped": False, "degenerate": False})
    return pd.DataFrame(rows, columns=["video_id", "outcome", "element", "score", "weight", "clipped", "degenerate"])
