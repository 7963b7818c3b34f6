"""
Per-element 0-100 scores from min-max scaled predictions, and the
importance-weighted overall score over the six unstructured elements.
"""

from typing import Dict, Mapping, Tuple

import structlog

from app.errors import UndefinedImportanceError
from app.models.results import PDPBounds, Scorecard
from app.models.schemas import Outcome, PredictionSource

logger = structlog.get_logger()

DEGENERATE_SCORE = 50.0


def element_score(prediction: float, lo: float, hi: float) -> Tuple[float, bool, bool]:
    """
    Returns:
        (score in [0, 100], clipped, degenerate)
    """
    if hi == lo:
        return DEGENERATE_SCORE, False, True
    raw = 100.0 * (prediction - lo) / (hi - lo)
    score = min(100.0, max(0.0, raw))
    return score, score != raw, False


def overall_score(scores: Mapping[str, float], weights: Mapping[str, float]) -> float:
    """sum(w * s) / sum(w) over the elements present in `scores`"""
    total = sum(weights.get(e, 0.0) for e in scores)
    if total <= 0:
        raise UndefinedImportanceError("Element weights sum to zero")
    return sum(weights.get(e, 0.0) * s for e, s in scores.items()) / total


def score_video(video_id: str,
                predictions: Mapping[Outcome, Mapping[PredictionSource, float]],
                bounds: PDPBounds,
                weights: Mapping[Outcome, Mapping[PredictionSource, float]]) -> Scorecard:
    """
    Args:
        predictions: outcome -> element -> prediction for one video
        bounds: training-sample ranges
        weights: outcome -> element -> importance percentage from the combined model
    """
    card = Scorecard(video_id=video_id)
    for outcome, per_element in predictions.items():
        scores: Dict[str, float] = {}
        for element, value in per_element.items():
            lo, hi = bounds.get(outcome, element)
            score, clipped, degenerate = element_score(float(value), lo, hi)
            key = f"{outcome.value}|{element.value}"
            if clipped:
                card.clipped.append(key)
            if degenerate:
                logger.warning("degenerate_element_score", video_id=video_id, element=key)
                card.degenerate.append(key)
            scores[element.value] = score
        element_weights = {e.value: float(w) for e, w in weights[outcome].items() if e.value in scores}
        card.element_scores[outcome.value] = scores
        card.weights[outcome.value] = element_weights
        card.overall[outcome.value] = overall_score(scores, element_weights)
    if card.clipped:
        logger.info("scores_clipped", video_id=video_id, count=len(card.clipped))
    return card
