"""Training-sample prediction ranges of each unstructured element"""

from typing import Iterable, Sequence

import pandas as pd
import structlog

from app.models.results import PDPBounds
from app.models.schemas import Outcome, PredictionSource

logger = structlog.get_logger()


def fit_pdp_bounds(predictions: pd.DataFrame, train_ids: Sequence[str],
                   outcomes: Iterable[Outcome]) -> PDPBounds:
    """
    Args:
        predictions: long table with columns video_id, outcome, source, prediction
        train_ids: ids of the training split
    """
    train = predictions[predictions["video_id"].isin(set(train_ids))]
    bounds = {}
    for outcome in outcomes:
        block = train[train["outcome"] == outcome.value]
        per_source = {}
        for source in PredictionSource:
            values = block.loc[block["source"] == source.value, "prediction"]
            if values.empty:
                continue
            lo, hi = float(values.min()), float(values.max())
            if lo == hi:
                logger.warning("degenerate_pdp_bounds", outcome=outcome.value, element=source.value, value=lo)
            per_source[source.value] = [lo, hi]
        bounds[outcome.value] = per_source
    return PDPBounds(bounds=bounds)
